"""Orthogonality-preserving local measurements and the round lower bound.

For a set of pairwise orthogonal states and one party, the Hermitian
operators H on that party's registers with <phi_i|H (x) I|phi_j> = 0 for
all i != j form a real vector space.  The eigenspaces of a generic element
give the finest projective measurement that keeps the states orthogonal;
recursing on its outcomes yields a lower bound on the number of rounds
when every round must be such a non-trivial measurement.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .qalg import (HermitianBasisElement, LayoutError, LocalOperator, Party, RegisterLayout,
                   StateVector, apply_local, nullspace)
from .states import StateFamily

CLUSTER_GAP = 1e-8
BRANCH_CUTOFF = 1e-10


class TrivialSpaceError(ValueError):
    pass


class IndistinguishableError(ValueError):
    pass


class DepthExceededError(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class OpmSpace:
    """Basis of the OPM space, expressed on an orthonormal frame of the acting space.

    `frame` is an n x s isometry whose columns span the subspace the
    operators live on (the identity frame when s == n).  Basis elements are
    s x s and orthonormal under the trace inner product.
    """

    party: Party
    acting_registers: tuple[str, ...]
    basis: tuple[HermitianBasisElement, ...]
    frame: np.ndarray

    @property
    def dim(self) -> int:
        return len(self.basis)

    @property
    def local_dim(self) -> int:
        return self.frame.shape[0]

    @property
    def support_dim(self) -> int:
        return self.frame.shape[1]

    def matrices(self) -> list[np.ndarray]:
        """Basis elements as operators on the full acting space."""
        v = self.frame
        return [v @ b.matrix @ v.conj().T for b in self.basis]


def _local_matrices(vecs: np.ndarray, layout: RegisterLayout, acting) -> np.ndarray:
    """Reshape a (k, N) stack into (k, n_acting, n_rest) coefficient matrices."""
    dims = layout.dims
    ax = [layout.index(r) for r in acting]
    rest = [i for i in range(len(dims)) if i not in ax]
    t = vecs.reshape((vecs.shape[0],) + dims)
    t = np.transpose(t, [0] + [a + 1 for a in ax] + [r + 1 for r in rest])
    n = int(np.prod([dims[a] for a in ax]))
    return t.reshape(vecs.shape[0], n, -1)


def _as_stack(states) -> tuple[np.ndarray, RegisterLayout]:
    if isinstance(states, StateFamily):
        return states.matrix(), states.layout
    states = list(states)
    if not states:
        raise ValueError("need at least one state")
    layout = states[0].layout
    for s in states:
        if s.layout != layout:
            raise LayoutError("states live on different layouts")
    return np.array([s.amplitudes for s in states]), layout


def _check_acting(layout, party, acting):
    party = Party.parse(party)
    if acting is None:
        acting = layout.party_registers(party)
    acting = tuple(acting)
    if not acting:
        raise LayoutError(f"{party.value} owns no registers")
    for r in acting:
        if layout.register(r).party is not party:
            raise LayoutError(f"register {r} is not owned by {party.value}")
    return party, acting


def constraint_rows(m: np.ndarray) -> np.ndarray:
    """Real constraint matrix over the isometric Hermitian parameters.

    m has shape (k, s, r).  Each pair i < j contributes the real and the
    imaginary part of sum_ab H_ab K_ij[a, b] with
    K_ij[a, b] = sum_y conj(m_i[a, y]) m_j[b, y].
    """
    k, s, _ = m.shape
    iu, ju = np.triu_indices(k, 1)
    if len(iu) == 0:
        return np.zeros((0, s * s))
    kk = np.einsum("pay,pby->pab", m[iu].conj(), m[ju])
    a, b = np.triu_indices(s, 1)
    cols = [kk[:, np.arange(s), np.arange(s)]]
    sym = (kk[:, a, b] + kk[:, b, a]) / np.sqrt(2)
    asym = 1j * (kk[:, a, b] - kk[:, b, a]) / np.sqrt(2)
    off = np.empty((kk.shape[0], 2 * len(a)), dtype=complex)
    off[:, 0::2] = sym
    off[:, 1::2] = asym
    cols.append(off)
    rows = np.concatenate(cols, axis=1)
    rows = np.concatenate([rows.real, rows.imag], axis=0)
    keep = np.any(np.abs(rows) > 1e-14, axis=1)
    return rows[keep]


def support_frame(m: np.ndarray, tol: float = 1e-10) -> np.ndarray:
    """Orthonormal columns spanning the local supports of all states."""
    k, n, r = m.shape
    flat = np.transpose(m, (1, 0, 2)).reshape(n, k * r)
    u, s, _ = np.linalg.svd(flat, full_matrices=False)
    rank = int(np.sum(s > tol * s[0])) if s.size and s[0] > 0 else 0
    return u[:, :rank]


def opm_space(states, party, acting_registers=None, restrict_to_support: bool = False,
              tol: float = 1e-10) -> OpmSpace:
    """Space of Hermitian H on the party's registers preserving pairwise orthogonality.

    With restrict_to_support the operators are only defined on the span of
    the states' local supports, which is what matters once earlier outcomes
    have confined the states to a subspace.
    """
    vecs, layout = _as_stack(states)
    party, acting = _check_acting(layout, party, acting_registers)
    norms = np.linalg.norm(vecs, axis=1)
    vecs = vecs / norms[:, None]
    m = _local_matrices(vecs, layout, acting)
    n = m.shape[1]
    frame = support_frame(m, tol) if restrict_to_support else np.eye(n)
    m = np.einsum("as,kar->ksr", frame.conj(), m)
    s = frame.shape[1]
    rows = constraint_rows(m)
    null = nullspace(rows, tol, ncols=s * s)
    basis = tuple(HermitianBasisElement.from_coordinates(v, s) for v in null)
    return OpmSpace(party, acting, basis, frame)


def is_trivial(space: OpmSpace, tol: float = 1e-8) -> bool:
    if space.dim != 1:
        return False
    w = np.linalg.eigvalsh(space.basis[0].matrix)
    return bool(w[-1] - w[0] < tol)


def _canonical_order(projectors: list[np.ndarray]) -> list[np.ndarray]:
    def key(p):
        diag = np.round(np.real(np.diag(p)), 8)
        return (int(round(np.real(np.trace(p)))), tuple(-diag))
    return sorted(projectors, key=key)


def finest_projective_opm(space: OpmSpace, seed: int = 42,
                          gap: float = CLUSTER_GAP) -> list[np.ndarray]:
    """Spectral projectors of a random element of the space.

    The projectors act on the full acting space and sum to the projector
    onto the space's frame (the identity for an unrestricted space).
    """
    if is_trivial(space):
        raise TrivialSpaceError("OPM space is spanned by the identity")
    rng = np.random.default_rng(seed)
    coeffs = rng.standard_normal(space.dim)
    g = sum(c * b.matrix for c, b in zip(coeffs, space.basis))
    w, v = np.linalg.eigh(g)
    groups = [[0]]
    for i in range(1, len(w)):
        if w[i] - w[i - 1] > gap:
            groups.append([i])
        else:
            groups[-1].append(i)
    frame = space.frame
    out = []
    for grp in groups:
        cols = frame @ v[:, grp]
        out.append(cols @ cols.conj().T)
    return _canonical_order(out)


def verify_opm_preserves(space: OpmSpace, states, samples: int = 100, seed: int = 0) -> float:
    """Worst off-diagonal overlap after applying sqrt of random PSD elements of the space."""
    vecs, layout = _as_stack(states)
    vecs = vecs / np.linalg.norm(vecs, axis=1)[:, None]
    m = _local_matrices(vecs, layout, space.acting_registers)
    rng = np.random.default_rng(seed)
    frame = space.frame
    worst = 0.0
    for _ in range(samples):
        coeffs = rng.standard_normal(space.dim)
        g = sum(c * b.matrix for c, b in zip(coeffs, space.basis))
        w, v = np.linalg.eigh(g)
        w = w - w[0]
        if w[-1] > 0:
            w = w / w[-1]
        root = frame @ (v * np.sqrt(np.clip(w, 0, None))) @ v.conj().T @ frame.conj().T
        if frame.shape[1] == frame.shape[0] and not np.any(w):
            root = np.eye(frame.shape[0])
        post = np.einsum("ab,kbr->kar", root, m).reshape(len(vecs), -1)
        gm = post.conj() @ post.T
        np.fill_diagonal(gm, 0)
        if gm.size:
            worst = max(worst, float(np.abs(gm).max()))
    return worst


@dataclass
class LowerBoundNode:
    labels: tuple[int, ...]
    rounds: int
    party: Party | None = None
    opm_dims: dict = field(default_factory=dict)
    projector_ranks: tuple[int, ...] = ()
    support_dim: int = 0
    children: list["LowerBoundNode"] = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "labels": list(self.labels),
            "party": None if self.party is None else self.party.value,
            "opm_dims": {p.value if isinstance(p, Party) else p: v for p, v in self.opm_dims.items()},
            "support_dim": self.support_dim,
            "projector_ranks": list(self.projector_ranks),
            "rounds": self.rounds,
            "children": [c.to_json() for c in self.children],
        }

    def walk(self):
        yield self
        for c in self.children:
            yield from c.walk()


@dataclass
class LowerBoundTrace:
    rounds: int
    root: LowerBoundNode
    seed: int

    def to_json(self) -> dict:
        return {"rounds": self.rounds, "seed": self.seed, "root": self.root.to_json()}


def round_lower_bound(fam: StateFamily, max_depth: int | None = None, seed: int = 42,
                      tol: float = 1e-10) -> tuple[int, LowerBoundTrace]:
    """Minimum number of rounds when each round is a finest non-trivial OPM."""
    layout = fam.layout
    if max_depth is None:
        max_depth = 4 * fam.d
    labels0 = tuple(fam.labels)
    vecs0 = fam.matrix()
    vecs0 = vecs0 / np.linalg.norm(vecs0, axis=1)[:, None]
    memo: dict = {}

    def key_of(labels, vecs):
        return (labels, np.round(vecs, 9).tobytes())

    def solve(labels, vecs, depth):
        if len(labels) == 1:
            return 0, LowerBoundNode(labels, 0)
        key = key_of(labels, vecs)
        if key in memo:
            return memo[key]
        if depth >= max_depth:
            raise DepthExceededError(f"recursion exceeded max depth {max_depth}")
        states = [StateVector(layout, v) for v in vecs]
        spaces = {p: opm_space(states, p, restrict_to_support=True, tol=tol) for p in Party}
        dims = {p: sp.dim for p, sp in spaces.items()}
        best = (math.inf, None)
        for party, space in spaces.items():
            if is_trivial(space):
                continue
            projs = finest_projective_opm(space, seed)
            ranks = tuple(int(round(np.real(np.trace(p)))) for p in projs)
            children, worst = [], 0
            for proj in projs:
                op = LocalOperator(space.acting_registers, proj, layout)
                post = apply_local(op, vecs)
                w = np.sum(np.abs(post) ** 2, axis=1)
                keep = w > BRANCH_CUTOFF
                if not keep.any():
                    continue
                sub = post[keep] / np.sqrt(w[keep])[:, None]
                sub_labels = tuple(l for l, k in zip(labels, keep) if k)
                val, node = solve(sub_labels, sub, depth + 1)
                worst = max(worst, val)
                children.append(node)
                if worst + 1 >= best[0]:
                    break
            if 1 + worst < best[0]:
                best = (1 + worst, LowerBoundNode(labels, 1 + worst, party, dims, ranks,
                                                  space.support_dim, children))
        if best[1] is None:
            best = (math.inf, LowerBoundNode(labels, -1, None, dims))
        memo[key] = best
        return best

    value, root = solve(labels0, vecs0, 0)
    if value == math.inf:
        raise IndistinguishableError("no party has a non-trivial orthogonality-preserving measurement")
    return int(value), LowerBoundTrace(int(value), root, seed)

