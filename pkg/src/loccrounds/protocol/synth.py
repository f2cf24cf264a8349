"""Depth-bounded search for the rounds that follow Bob's first measurement.

The tables for d = 6 show the pattern: each round one party measures in a
basis made of computational kets, two-level ± kets, and (for states
entangled with an ancilla pair) products of two ± kets, grouping basis
vectors into outcomes so that no pair of live states loses orthogonality.
For other d the same kind of round is searched for directly.  Within one
basis, two basis vectors must share an outcome whenever some pair of live
states overlaps on both of them; the connected components of that
relation are the finest valid grouping.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

from ..qalg import Party, RegisterLayout, apply_local, LocalOperator
from ..states import Ket, family, with_bells
from .local import local_identifier, pair_distinguisher, NotDistinguishableError
from .model import ProjTerm
from .plan import COMP, BuildError, Step, child_prefix, family_states, live_states

TOL = 1e-9


@dataclass(frozen=True)
class Basis:
    """Orthonormal real basis of a party's local space with ket labels per vector."""

    matrix: np.ndarray  # columns are basis vectors
    kets: tuple  # per column: tuple of Ket, one per register


def _local_index_tuples(dims):
    return list(itertools.product(*[range(d) for d in dims]))


def _structures(supports, dims, tuples):
    """Two-element local supports that differ in one register (pair) or two (block)."""
    pairs, blocks = [], []
    for s in supports:
        if len(s) != 2:
            continue
        x, y = (tuples[i] for i in sorted(s))
        diff = [r for r in range(len(dims)) if x[r] != y[r]]
        if len(diff) == 1:
            pairs.append(frozenset(s))
        elif len(diff) == 2:
            r1, r2 = diff
            elems = []
            for v1 in (x[r1], y[r1]):
                for v2 in (x[r2], y[r2]):
                    t = list(x)
                    t[r1], t[r2] = v1, v2
                    elems.append(tuples.index(tuple(t)))
            blocks.append((frozenset(s), frozenset(elems)))
    return list(dict.fromkeys(pairs)), list(dict.fromkeys(blocks))


def _basis_from(structs, dims, tuples) -> Basis:
    """Computational basis with the chosen pairs and blocks rotated to ± kets."""
    n = len(tuples)
    cols, kets, used = [], [], set()
    for elems in structs:
        elems = sorted(elems)
        ts = [tuples[i] for i in elems]
        diff = [r for r in range(len(dims)) if len({t[r] for t in ts}) > 1]
        base = ts[0]
        if len(diff) == 1:
            r = diff[0]
            lo, hi = sorted({t[r] for t in ts})
            for sign in (1, -1):
                v = np.zeros(n)
                v[elems[0]], v[elems[1]] = 1 / np.sqrt(2), sign / np.sqrt(2)
                k = [Ket(c) for c in base]
                k[r] = Ket(lo, hi, sign)
                cols.append(v)
                kets.append(tuple(k))
        else:
            r1, r2 = diff
            l1 = sorted({t[r1] for t in ts})
            l2 = sorted({t[r2] for t in ts})
            for s1 in (1, -1):
                for s2 in (1, -1):
                    v = np.zeros(n)
                    for i, t in zip(elems, ts):
                        v[i] = 0.5 * (s1 if t[r1] == l1[1] else 1) * (s2 if t[r2] == l2[1] else 1)
                    k = [Ket(c) for c in base]
                    k[r1] = Ket(l1[0], l1[1], s1)
                    k[r2] = Ket(l2[0], l2[1], s2)
                    cols.append(v)
                    kets.append(tuple(k))
        used.update(elems)
    for i in range(n):
        if i not in used:
            v = np.zeros(n)
            v[i] = 1
            cols.append(v)
            kets.append(tuple(Ket(c) for c in tuples[i]))
    return Basis(np.array(cols).T, tuple(kets))


def _pick(candidates, taken=None):
    out, taken = [], set(taken or ())
    for elems in candidates:
        if taken.isdisjoint(elems):
            out.append(elems)
            taken |= elems
    return out


def candidate_bases(local: np.ndarray, dims) -> list[Basis]:
    """Computational, clean-structure and all-structure bases for one party.

    `local` has shape (k, n, r): each live state's coefficient matrix with
    the party's registers as rows.
    """
    tuples = _local_index_tuples(dims)
    weight = np.sum(np.abs(local) ** 2, axis=2) > TOL
    supports = [frozenset(np.flatnonzero(w)) for w in weight]
    pairs, blocks = _structures(supports, dims, tuples)

    def clean(sup, elems):
        return all(s <= elems or s.isdisjoint(elems) for s in supports)

    clean_pairs = [p for p in pairs if clean(p, p)]
    clean_blocks = [e for s, e in blocks if clean(s, e)]
    all_blocks = [e for _, e in blocks]
    options = [
        [],
        _pick(clean_pairs + clean_blocks),
        _pick(clean_blocks + clean_pairs),
        _pick(all_blocks, set().union(*clean_pairs) if clean_pairs else set()) + clean_pairs,
        _pick(pairs + all_blocks),
        _pick(all_blocks + pairs),
        _pick(all_blocks),
    ]
    seen, out = set(), []
    for structs in options:
        key = frozenset(frozenset(s) for s in structs)
        if key in seen:
            continue
        seen.add(key)
        out.append(_basis_from(structs, dims, tuples))
    return out


def finest_grouping(local: np.ndarray, basis: Basis) -> list[list[int]]:
    """Connected components of basis vectors linked by overlapping state pairs."""
    c = np.einsum("nx,knr->kxr", basis.matrix, local)
    w = np.einsum("ixr,jxr->ijx", c.conj(), c)
    k, n = c.shape[0], c.shape[1]
    occupied = np.sum(np.abs(c) ** 2, axis=2) > TOL
    parent = list(range(n))

    def find(a):
        while parent[a] != a:
            parent[a] = parent[parent[a]]
            a = parent[a]
        return a

    for i in range(k):
        for j in range(i + 1, k):
            xs = np.flatnonzero(np.abs(w[i, j]) > TOL)
            for x in xs[1:]:
                ra, rb = find(xs[0]), find(x)
                if ra != rb:
                    parent[rb] = ra
    live_cols = np.flatnonzero(occupied.any(axis=0))
    groups: dict[int, list[int]] = {}
    for x in live_cols:
        groups.setdefault(find(x), []).append(int(x))
    return sorted(groups.values())


def merge_terms(kets_list, registers) -> list[ProjTerm]:
    """Combine rank-one product terms that differ in a single register."""
    terms = [tuple((k,) for k in ks) for ks in kets_list]
    changed = True
    while changed:
        changed = False
        for r in range(len(registers)):
            groups: dict = {}
            for t in terms:
                key = t[:r] + t[r + 1:]
                groups.setdefault(key, []).append(t)
            if any(len(g) > 1 for g in groups.values()):
                new = []
                for key, g in groups.items():
                    merged = tuple(sorted({k for t in g for k in t[r]}, key=Ket.sort_key))
                    new.append(key[:r] + (merged,) + key[r:])
                if len(new) < len(terms):
                    terms = new
                    changed = True
    out = []
    for t in sorted(terms, key=lambda t: [[k.sort_key() for k in ks] for ks in t]):
        factors = tuple((reg, ks) for reg, ks in zip(registers, t))
        out.append(ProjTerm(factors))
    return out


def _drop_identity(term: ProjTerm, layout: RegisterLayout) -> ProjTerm:
    keep = tuple((r, ks) for r, ks in term.factors
                 if len(ks) < layout.register(r).dim or any(not k.is_basis for k in ks))
    return ProjTerm(keep)


class Synthesizer:
    def __init__(self, layout: RegisterLayout, max_nodes: int = 200000):
        self.layout = layout
        self.memo: dict = {}
        self.nodes = 0
        self.max_nodes = max_nodes
        self.regs = {p: layout.party_registers(p) for p in Party}
        self.dims = {p: [layout.register(r).dim for r in self.regs[p]] for p in Party}
        self.bases_cache: dict = {}

    def _local(self, stack, party):
        layout = self.layout
        ax = [layout.index(r) for r in self.regs[party]]
        rest = [i for i in range(len(layout.dims)) if i not in ax]
        t = stack.reshape((stack.shape[0],) + layout.dims)
        t = np.transpose(t, [0] + [a + 1 for a in ax] + [r + 1 for r in rest])
        n = int(np.prod(self.dims[party]))
        return t.reshape(stack.shape[0], n, -1)

    def moves(self, live, party, parent_label):
        labels = sorted(live)
        stack = np.array([live[l] for l in labels])
        local = self._local(stack, party)
        regs = self.regs[party]
        out = []
        for basis in candidate_bases(local, self.dims[party]):
            groups = finest_grouping(local, basis)
            if len(groups) < 2:
                continue
            prefix = child_prefix(party, parent_label)
            outcomes, children = [], []
            for g_index, grp in enumerate(groups, start=1):
                terms = merge_terms([basis.kets[x] for x in grp], regs)
                terms = [_drop_identity(t, self.layout) for t in terms]
                proj = basis.matrix[:, grp] @ basis.matrix[:, grp].T
                op = LocalOperator(regs, proj, self.layout)
                post = apply_local(op, stack)
                sub = live_states({l: post[i] for i, l in enumerate(labels)})
                label = f"{prefix}{g_index}"
                outcomes.append((label, terms))
                children.append((label, sub))
            outcomes[-1] = (outcomes[-1][0], COMP)
            out.append((outcomes, children))
        out.sort(key=lambda m: max(len(s) for _, s in m[1]))
        return out

    def _key(self, live):
        labels = tuple(sorted(live))
        stack = np.array([live[l] for l in labels])
        return labels, np.round(stack, 8).tobytes()

    def finish(self, live, last_party, parent_label):
        order = [Party.ALICE, Party.BOB] if last_party is None else [last_party.other, last_party]
        for party in order:
            m = local_identifier(self.layout, live, party, prefix=child_prefix(party, parent_label))
            if m is not None:
                return m
        if len(live) == 2:
            (_, v1), (_, v2) = sorted(live.items())
            try:
                return pair_distinguisher(v1, v2, self.layout,
                                          prefix="X")
            except NotDistinguishableError:
                return None
        return None

    def solve(self, live, budget, last_party=None, parent_label=None):
        """(depth, Step or None) with depth <= budget, or None when the search fails."""
        if len(live) <= 1:
            return 0, None
        if budget <= 0:
            return None
        key = self._key(live)
        hit = self.memo.get(key)
        if hit is not None:
            kind, val = hit
            if kind == "fail" and budget <= val:
                return None
            if kind == "ok" and val[0] <= budget and val[2] == parent_label:
                return val[0], val[1]
        self.nodes += 1
        if self.nodes > self.max_nodes:
            raise BuildError("search budget exhausted")
        m = self.finish(live, last_party, parent_label)
        if m is not None:
            step = measurement_step(m, parent_label)
            self.memo[key] = ("ok", (1, step, parent_label))
            return 1, step
        if budget >= 2:
            parties = [Party.ALICE, Party.BOB] if last_party is None else [last_party.other]
            for party in parties:
                for outcomes, children in self.moves(live, party, parent_label):
                    worst, nxt = 0, {}
                    for label, sub in children:
                        res = self.solve(sub, budget - 1, party, label)
                        if res is None:
                            worst = None
                            break
                        worst = max(worst, res[0])
                        if res[1] is not None:
                            nxt[label] = res[1]
                    if worst is None:
                        continue
                    step = Step(party.value, outcomes, nxt)
                    self.memo[key] = ("ok", (1 + worst, step, parent_label))
                    return 1 + worst, step
        prev = self.memo.get(key)
        if prev is None or prev[0] == "fail":
            self.memo[key] = ("fail", max(budget, prev[1] if prev else 0))
        return None


def measurement_step(m, parent_label) -> Step:
    prefix = child_prefix(m.party, parent_label)
    outs = []
    for k, o in enumerate(m.outcomes, start=1):
        outs.append((f"{prefix}{k}", COMP if o.complement else list(o.terms)))
    return Step(m.party.value, outs)


def branch_states(kind: str, d: int):
    """Live states after Bob's first outcome (B1, or B1 with C1)."""
    from .builders import _one_ebit_round1, _two_ebit_round1, ONE_EBIT, TWO_EBIT
    pairs = ONE_EBIT if kind == "one" else TWO_EBIT
    fam = with_bells(family(d), pairs)
    root = Step("bob", _one_ebit_round1(d) if kind == "one" else _two_ebit_round1(d))
    meas = root.measurement(fam.layout)
    op = meas.operators(fam.layout)[0]
    states = family_states(fam)
    labels = sorted(states)
    post = apply_local(op, np.array([states[l] for l in labels]))
    return fam.layout, live_states({l: post[i] for i, l in enumerate(labels)}), meas.outcomes[0].label


def synthesize_branch(kind: str, d: int, budget: int | None = None) -> Step:
    if budget is None:
        budget = d - 1 if kind == "one" else d - 3
    layout, live, label = branch_states(kind, d)
    syn = Synthesizer(layout)
    res = syn.solve(live, budget, Party.BOB, label)
    if res is None:
        raise BuildError(f"no {kind}-ebit continuation within {budget} rounds for d={d}")
    depth, step = res
    return step
