"""One-round local measurements for residual sets of product states."""

from __future__ import annotations

import numpy as np

from ..qalg import Party, RegisterLayout, StateVector
from ..states import Ket
from .model import Measurement, Outcome, ProjTerm

ATOL = 1e-9


class NotDistinguishableError(ValueError):
    pass


def ket_of(v: np.ndarray, atol: float = ATOL) -> Ket | None:
    """Match a (possibly unnormalized) vector to |a> or |a±b> up to phase."""
    n = np.linalg.norm(v)
    if n < atol:
        return None
    v = v / n
    support = np.flatnonzero(np.abs(v) > atol)
    if len(support) == 1:
        return Ket(int(support[0]))
    if len(support) == 2:
        a, b = (int(x) for x in support)
        if abs(abs(v[a]) - abs(v[b])) > atol:
            return None
        ratio = v[b] / v[a]
        for sign in (1, -1):
            if abs(ratio - sign) < 1e-7:
                return Ket(a, b, sign)
    return None


def register_factors(vec: np.ndarray, dims) -> list[np.ndarray] | None:
    """Split a vector into one factor per axis, or None if it is entangled across axes."""
    t = np.asarray(vec, dtype=complex).reshape(dims)
    out = []
    rest = t
    for i, d in enumerate(dims):
        m = rest.reshape(d, -1)
        u, s, vh = np.linalg.svd(m, full_matrices=False)
        if s.size > 1 and s[1] > ATOL * max(s[0], 1e-300):
            return None
        out.append(u[:, 0] * s[0])
        rest = vh[0]
    # fold the scale into the first factor only
    scale = np.prod([np.linalg.norm(f) for f in out])
    out = [f / np.linalg.norm(f) for f in out]
    out[0] = out[0] * scale
    return out


def local_part(vec: np.ndarray, layout: RegisterLayout, registers) -> np.ndarray | None:
    """The factor of a product state on the given registers (None if entangled with the rest)."""
    ax = [layout.index(r) for r in registers]
    rest = [i for i in range(len(layout.registers)) if i not in ax]
    dims = layout.dims
    t = np.transpose(vec.reshape(dims), ax + rest)
    n = int(np.prod([dims[a] for a in ax]))
    m = t.reshape(n, -1)
    u, s, _ = np.linalg.svd(m, full_matrices=False)
    if s.size > 1 and s[1] > ATOL * s[0]:
        return None
    return u[:, 0]


def product_term(vec: np.ndarray, layout: RegisterLayout, registers) -> ProjTerm | None:
    """Rank-one ProjTerm onto vec when vec is a product of recognizable kets."""
    dims = [layout.register(r).dim for r in registers]
    factors = register_factors(vec, dims)
    if factors is None:
        return None
    items = []
    for r, f, d in zip(registers, factors, dims):
        k = ket_of(f)
        if k is None:
            return None
        items.append((r, (k,)))
    return ProjTerm(tuple(items))


def local_identifier(layout: RegisterLayout, live: dict[int, np.ndarray], party,
                     prefix: str = "X") -> Measurement | None:
    """A one-round measurement by `party` that identifies every live state, if one exists.

    Each state must be a product with respect to the party's registers and
    the local parts must be pairwise orthogonal kets.  The last outcome is
    written as the complement.
    """
    party = Party.parse(party)
    regs = [r for r in layout.party_registers(party)
            if _register_varies(layout, live, r)] or list(layout.party_registers(party))[:1]
    labels = sorted(live)
    parts = []
    for l in labels:
        u = local_part(live[l], layout, regs)
        if u is None:
            return None
        parts.append(u)
    mat = np.array(parts)
    g = np.abs(mat.conj() @ mat.T)
    np.fill_diagonal(g, 0)
    if g.size and g.max() > ATOL:
        return None
    outcomes = []
    for k, (l, u) in enumerate(zip(labels, parts), start=1):
        term = product_term(u, layout, regs)
        if term is None:
            return None
        outcomes.append(Outcome(f"{prefix}{k}", (term,)))
    last = outcomes[-1]
    outcomes[-1] = Outcome(last.label, (), complement=True)
    return Measurement.build(layout, party, outcomes, registers=[n for n in layout.names if n in regs])


def _register_varies(layout, live, reg) -> bool:
    """Whether the states' factors on `reg` are not all the same ray."""
    ref = None
    for v in live.values():
        u = local_part(v, layout, [reg])
        if u is None:
            return True
        if ref is None:
            ref = u
        elif abs(abs(np.vdot(ref, u)) - 1) > ATOL:
            return True
    return False


def pair_distinguisher(s1, s2, layout: RegisterLayout | None = None,
                       prefix: str = "X") -> Measurement:
    """Single-register projective measurement telling two orthogonal product states apart.

    Registers are scanned in layout order; the first one where the two
    factors are orthogonal is measured by its owner, projecting onto the
    first state's factor (a basis ket or a two-level ± ket).
    """
    v1 = s1.amplitudes if isinstance(s1, StateVector) else np.asarray(s1)
    v2 = s2.amplitudes if isinstance(s2, StateVector) else np.asarray(s2)
    if layout is None:
        layout = s1.layout
    dims = layout.dims
    f1 = register_factors(v1, dims)
    f2 = register_factors(v2, dims)
    if f1 is None or f2 is None:
        raise NotDistinguishableError("states are not products over single registers")
    for reg, a, b in zip(layout.registers, f1, f2):
        na, nb = np.linalg.norm(a), np.linalg.norm(b)
        if abs(np.vdot(a, b)) > ATOL * na * nb:
            continue
        for first in (a, b):
            k = ket_of(first)
            if k is not None:
                outs = [Outcome(f"{prefix}1", (ProjTerm(((reg.name, (k,)),)),)),
                        Outcome(f"{prefix}2", (), complement=True)]
                return Measurement.build(layout, reg.party, outs, registers=[reg.name])
    raise NotDistinguishableError("no register carries orthogonal basis or ± factors")
