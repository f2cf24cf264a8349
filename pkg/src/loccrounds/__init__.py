"""Round counting for local discrimination of orthogonal product states."""

__version__ = "0.1.0"
