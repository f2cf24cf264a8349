"""Dense linear algebra over small multi-register Hilbert spaces.

Registers are stored in declaration order and amplitudes are indexed
row-major over that order, so the first register is the most significant
digit of the flat index.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Sequence

import numpy as np

RANK_RTOL = 1e-10
HERMITIAN_ATOL = 1e-12


class Party(str, Enum):
    ALICE = "alice"
    BOB = "bob"

    @property
    def other(self) -> "Party":
        return Party.BOB if self is Party.ALICE else Party.ALICE

    @classmethod
    def parse(cls, value) -> "Party":
        if isinstance(value, Party):
            return value
        try:
            return cls(str(value).lower())
        except ValueError:
            raise ValueError(f"unknown party {value!r}") from None


class LayoutError(ValueError):
    pass


@dataclass(frozen=True)
class Register:
    name: str
    party: Party
    dim: int

    def __post_init__(self):
        object.__setattr__(self, "party", Party.parse(self.party))
        if not self.name.isidentifier():
            raise LayoutError(f"register name {self.name!r} is not an identifier")
        if int(self.dim) < 2:
            raise LayoutError(f"register {self.name} has dim {self.dim} < 2")


@dataclass(frozen=True)
class RegisterLayout:
    registers: tuple[Register, ...]

    def __post_init__(self):
        regs = tuple(r if isinstance(r, Register) else Register(*r) for r in self.registers)
        object.__setattr__(self, "registers", regs)
        names = [r.name for r in regs]
        if len(set(names)) != len(names):
            raise LayoutError(f"duplicate register names in {names}")
        if not regs:
            raise LayoutError("layout needs at least one register")

    @classmethod
    def of(cls, *specs) -> "RegisterLayout":
        """RegisterLayout.of(("A", "alice", 6), ("B", "bob", 6))"""
        return cls(tuple(Register(n, p, d) for n, p, d in specs))

    @property
    def names(self) -> tuple[str, ...]:
        return tuple(r.name for r in self.registers)

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(r.dim for r in self.registers)

    @property
    def total_dim(self) -> int:
        return int(np.prod(self.dims))

    def index(self, name: str) -> int:
        try:
            return self.names.index(name)
        except ValueError:
            raise LayoutError(f"unknown register {name!r}") from None

    def register(self, name: str) -> Register:
        return self.registers[self.index(name)]

    def __contains__(self, name) -> bool:
        return name in self.names

    def party_registers(self, party) -> tuple[str, ...]:
        party = Party.parse(party)
        return tuple(r.name for r in self.registers if r.party is party)

    def flat_index(self, values: dict[str, int]) -> int:
        """Row-major index of the computational basis state given per-register values."""
        idx = 0
        for r in self.registers:
            v = int(values.get(r.name, 0))
            if not 0 <= v < r.dim:
                raise LayoutError(f"value {v} out of range for register {r.name}")
            idx = idx * r.dim + v
        return idx

    def concat(self, other: "RegisterLayout") -> "RegisterLayout":
        return RegisterLayout(self.registers + other.registers)

    def to_json(self) -> list[dict]:
        return [{"name": r.name, "party": r.party.value, "dim": r.dim} for r in self.registers]

    @classmethod
    def from_json(cls, items) -> "RegisterLayout":
        return cls(tuple(Register(it["name"], it["party"], int(it["dim"])) for it in items))


@dataclass(frozen=True, eq=False)
class StateVector:
    layout: RegisterLayout
    amplitudes: np.ndarray
    normalized: bool = False

    def __post_init__(self):
        amps = np.array(self.amplitudes, dtype=complex).reshape(-1)
        if amps.size != self.layout.total_dim:
            raise LayoutError(
                f"amplitude length {amps.size} does not match layout dim {self.layout.total_dim}")
        if self.normalized and abs(np.linalg.norm(amps) - 1) > 1e-12:
            raise ValueError("state flagged normalized but norm differs from 1")
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)

    @classmethod
    def basis(cls, layout: RegisterLayout, values: dict[str, int]) -> "StateVector":
        amps = np.zeros(layout.total_dim, dtype=complex)
        amps[layout.flat_index(values)] = 1.0
        return cls(layout, amps, normalized=True)

    @classmethod
    def product(cls, layout: RegisterLayout, factors: dict[str, np.ndarray]) -> "StateVector":
        """Tensor product of one vector per register (missing registers default to |0>)."""
        out = np.ones(1, dtype=complex)
        for r in layout.registers:
            if r.name in factors:
                v = np.asarray(factors[r.name], dtype=complex)
                if v.shape != (r.dim,):
                    raise LayoutError(f"factor for {r.name} has shape {v.shape}")
            else:
                v = np.zeros(r.dim, dtype=complex)
                v[0] = 1
            out = np.kron(out, v)
        return cls(layout, out)

    def norm(self) -> float:
        return float(np.linalg.norm(self.amplitudes))

    def normalize(self) -> "StateVector":
        n = self.norm()
        if n == 0:
            raise ValueError("cannot normalize the zero vector")
        return StateVector(self.layout, self.amplitudes / n, normalized=True)

    def tensor(self) -> np.ndarray:
        """Amplitudes viewed as an array with one axis per register."""
        return self.amplitudes.reshape(self.layout.dims)


def _check_same_layout(x: StateVector, y: StateVector):
    if x.layout != y.layout:
        raise LayoutError("states live on different layouts")


def inner(x: StateVector, y: StateVector) -> complex:
    _check_same_layout(x, y)
    return complex(np.vdot(x.amplitudes, y.amplitudes))


def tensor(x: StateVector, y: StateVector) -> StateVector:
    layout = x.layout.concat(y.layout)
    return StateVector(layout, np.kron(x.amplitudes, y.amplitudes),
                       normalized=x.normalized and y.normalized)


def _bipartition_axes(layout: RegisterLayout, bipartition) -> tuple[list[int], list[int]]:
    first, second = (list(part) for part in bipartition)
    if set(first) & set(second):
        raise LayoutError("bipartition blocks overlap")
    if sorted(first + second) != sorted(layout.names):
        raise LayoutError("bipartition must cover every register exactly once")
    return [layout.index(n) for n in first], [layout.index(n) for n in second]


def reshape_to_matrix(x: StateVector, bipartition) -> np.ndarray:
    """Coefficient matrix m_ij of x with i on the first block and j on the second."""
    ax1, ax2 = _bipartition_axes(x.layout, bipartition)
    dims = x.layout.dims
    t = np.transpose(x.tensor(), ax1 + ax2)
    n1 = int(np.prod([dims[a] for a in ax1]))
    return t.reshape(n1, -1)


def numerical_rank(m: np.ndarray, rtol: float = RANK_RTOL) -> int:
    if m.size == 0:
        return 0
    s = np.linalg.svd(m, compute_uv=False)
    if s[0] == 0:
        return 0
    return int(np.sum(s > rtol * s[0]))


def schmidt_rank(x: StateVector, bipartition) -> int:
    return numerical_rank(reshape_to_matrix(x, bipartition))


@dataclass(frozen=True, eq=False)
class LocalOperator:
    """A matrix acting on the listed registers (in the listed order)."""

    acting_registers: tuple[str, ...]
    matrix: np.ndarray
    layout: RegisterLayout

    def __post_init__(self):
        acting = tuple(self.acting_registers)
        object.__setattr__(self, "acting_registers", acting)
        for n in acting:
            self.layout.index(n)
        if len(set(acting)) != len(acting):
            raise LayoutError("acting registers repeated")
        m = np.array(self.matrix, dtype=complex)
        n = self.dim
        if m.shape != (n, n):
            raise LayoutError(f"operator on {acting} must be {n}x{n}, got {m.shape}")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(self.layout.register(n).dim for n in self.acting_registers)

    @property
    def dim(self) -> int:
        return int(np.prod(self.dims))

    @property
    def parties(self) -> set[Party]:
        return {self.layout.register(n).party for n in self.acting_registers}


def embed(op: LocalOperator, layout: RegisterLayout | None = None) -> np.ndarray:
    """Full total_dim x total_dim matrix of op tensored with identity elsewhere."""
    layout = layout or op.layout
    acting = [layout.index(n) for n in op.acting_registers]
    rest = [i for i in range(len(layout.registers)) if i not in acting]
    dims = layout.dims
    n_rest = int(np.prod([dims[i] for i in rest])) if rest else 1
    big = np.kron(op.matrix, np.eye(n_rest))
    # big acts on axes ordered (acting..., rest...); permute back to layout order
    order = acting + rest
    shape = [dims[i] for i in order]
    k = len(order)
    t = big.reshape(shape + shape)
    inv = list(np.argsort(order))
    t = np.transpose(t, inv + [k + i for i in inv])
    n = layout.total_dim
    return t.reshape(n, n)


def apply_local(op: LocalOperator, states: np.ndarray) -> np.ndarray:
    """Apply op to a stack of flat state vectors of shape (k, total_dim) or (total_dim,)."""
    layout = op.layout
    single = states.ndim == 1
    stack = states.reshape(1, -1) if single else states
    dims = layout.dims
    t = stack.reshape((stack.shape[0],) + dims)
    acting = [layout.index(n) for n in op.acting_registers]
    m = op.matrix.reshape(op.dims + op.dims)
    k = len(acting)
    out = np.tensordot(m, t, axes=(list(range(k, 2 * k)), [a + 1 for a in acting]))
    # out axes: acting (k of them), batch, remaining registers in order
    rest = [i for i in range(len(dims)) if i not in acting]
    cur = acting + ["batch"] + rest
    target = ["batch"] + list(range(len(dims)))
    out = np.transpose(out, [cur.index(x) for x in target])
    out = out.reshape(stack.shape)
    return out[0] if single else out


def nullspace(rows: np.ndarray, tol: float = 1e-10, ncols: int | None = None) -> np.ndarray:
    """Orthonormal basis (as rows) of the right nullspace of `rows`.

    Singular values below tol times the largest one count as zero.  An
    empty matrix yields the standard basis of the full space, which needs
    `ncols` when there are no rows to infer the width from.
    """
    rows = np.asarray(rows, dtype=float)
    if rows.ndim != 2:
        if ncols is None:
            raise ValueError("cannot infer width of an empty constraint matrix")
        rows = rows.reshape(0, ncols)
    n = rows.shape[1]
    if rows.shape[0] == 0 or not np.any(rows):
        return np.eye(n)
    if not np.all(np.isfinite(rows)):
        raise ValueError("constraint matrix has non-finite entries")
    _, s, vh = np.linalg.svd(rows, full_matrices=True)
    rank = int(np.sum(s > tol * s[0]))
    return vh[rank:].copy()


@dataclass(frozen=True, eq=False)
class HermitianBasisElement:
    matrix: np.ndarray

    def __post_init__(self):
        m = np.array(self.matrix, dtype=complex)
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError("Hermitian element must be a square matrix")
        if not np.allclose(m, m.conj().T, atol=HERMITIAN_ATOL, rtol=0):
            raise ValueError("matrix is not Hermitian")
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)

    @property
    def n(self) -> int:
        return self.matrix.shape[0]

    @property
    def coordinates(self) -> np.ndarray:
        return hermitian_params(self.matrix)

    @classmethod
    def from_coordinates(cls, params, n: int) -> "HermitianBasisElement":
        return cls(hermitian_from_params(params, n))


def _offdiag_pairs(n: int):
    return [(a, b) for a in range(n) for b in range(a + 1, n)]


def hermitian_from_params(params: Sequence[float], n: int) -> np.ndarray:
    """Inverse of hermitian_params.

    The n diagonal entries come first, then for every pair a<b the real and
    imaginary part of the (a, b) entry scaled by sqrt(2), so that the map
    from parameters to matrices is an isometry for the Frobenius norm.
    """
    params = np.asarray(params, dtype=float)
    if params.shape != (n * n,):
        raise ValueError(f"expected {n * n} parameters, got {params.shape}")
    h = np.diag(params[:n]).astype(complex)
    pos = n
    for a, b in _offdiag_pairs(n):
        z = (params[pos] + 1j * params[pos + 1]) / np.sqrt(2)
        h[a, b] = z
        h[b, a] = np.conj(z)
        pos += 2
    return h


def hermitian_params(h: np.ndarray) -> np.ndarray:
    n = h.shape[0]
    out = [h[a, a].real for a in range(n)]
    for a, b in _offdiag_pairs(n):
        out += [np.sqrt(2) * h[a, b].real, np.sqrt(2) * h[a, b].imag]
    return np.array(out)


def eig_hermitian(h) -> tuple[np.ndarray, np.ndarray]:
    """Ascending eigenvalues and orthonormal eigenvectors (as columns)."""
    m = h.matrix if isinstance(h, HermitianBasisElement) else np.asarray(h, dtype=complex)
    scale = max(1.0, float(np.max(np.abs(m)))) if m.size else 1.0
    if not np.allclose(m, m.conj().T, atol=HERMITIAN_ATOL * scale, rtol=0):
        raise ValueError("matrix is not Hermitian")
    w, v = np.linalg.eigh((m + m.conj().T) / 2)
    return w, v


def is_projector(m: np.ndarray, atol: float = 1e-9) -> bool:
    return bool(np.allclose(m, m.conj().T, atol=atol) and np.allclose(m @ m, m, atol=atol))


def gram(vectors: Iterable[np.ndarray]) -> np.ndarray:
    mat = np.array([np.asarray(v) for v in vectors], dtype=complex)
    return mat.conj() @ mat.T
