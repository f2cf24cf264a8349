"""Protocol builders for the plain, one-ebit and two-ebit settings."""

from __future__ import annotations

import numpy as np

from ..qalg import Party
from ..states import family, with_bells
from .local import local_identifier
from .model import Measurement, Outcome, ProjTerm, ProtocolTree
from .plan import COMP, Step, child_prefix, family_states, grow
from . import tables

ONE_EBIT = (("a", "b"),)
TWO_EBIT = (("a1", "b1"), ("a2", "b2"))


def _check_d(d: int, minimum: int):
    if not isinstance(d, (int, np.integer)) or d % 2 or d < minimum:
        raise ValueError(f"d must be an even integer >= {minimum}, got {d!r}")


def _peel(layout, live, party: Party, index: int) -> Measurement:
    """Split off the lowest level of the party's register that any live state occupies."""
    reg = "A" if party is Party.ALICE else "B"
    axis = layout.index(reg)
    low = None
    for v in live.values():
        t = np.abs(v.reshape(layout.dims)) ** 2
        marg = t.sum(axis=tuple(i for i in range(t.ndim) if i != axis))
        occ = np.flatnonzero(marg > 1e-12)
        low = occ[0] if low is None else min(low, occ[0])
    letter = "A" if party is Party.ALICE else "B"
    outs = [Outcome(f"{letter}{index}x", (ProjTerm.of(**{reg: int(low)}),)),
            Outcome(f"{letter}{index}y", (), complement=True)]
    return Measurement.build(layout, party, outs)


def build_plain(d: int) -> ProtocolTree:
    """Alternating peel rounds: Alice splits off her lowest row, Bob his lowest column.

    A peeled-off row (column) is then finished by the other party in one
    round, by projecting onto the ± and basis kets that label its states.
    """
    _check_d(d, 2)
    fam = family(d)
    layout = fam.layout

    def planner(live, last_party, parent_label, index):
        party = Party.ALICE if index % 2 else Party.BOB
        m = local_identifier(layout, live, party, prefix=child_prefix(party, parent_label))
        if m is not None:
            return m
        return _peel(layout, live, party, index)

    root = grow(layout, family_states(fam), planner)
    return ProtocolTree(f"plain-d{d}", layout, root)


def _one_ebit_round1(d: int) -> list:
    h = d // 2
    return [("B1", [ProjTerm.of(B=list(range(h)), b=0), ProjTerm.of(B=list(range(h, d)), b=1)]),
            ("B2", COMP)]


def _tags(d: int):
    """Ancilla tags (b1, b2) attached to column j by the outcomes B1 and C1."""
    h = d // 2
    t1 = [int(j >= h) for j in range(d)]
    t2 = [0 if (j == 0 or j > h) else 1 for j in range(d)]
    return t1, t2


def _two_ebit_round1(d: int) -> list:
    t1, t2 = _tags(d)
    outs = []
    for i, k in ((1, 1), (1, 2), (2, 1), (2, 2)):
        label = f"B{i}C{k}"
        if (i, k) == (2, 2):
            outs.append((label, COMP))
            continue
        groups: dict = {}
        for j in range(d):
            key = (t1[j] ^ (i - 1), t2[j] ^ (k - 1))
            groups.setdefault(key, []).append(j)
        terms = [ProjTerm.of(B=cols, b1=x, b2=y) for (x, y), cols in sorted(groups.items())]
        outs.append((label, terms))
    return outs


def one_ebit_plan(d: int) -> Step:
    if d == 6:
        branch = tables.one_ebit_b1_branch()
    else:
        from .synth import synthesize_branch
        branch = synthesize_branch("one", d)
    return Step("bob", _one_ebit_round1(d), {"B1": branch, "B2": branch.flipped({"a", "b"})})


def two_ebit_plan(d: int) -> Step:
    if d == 6:
        branch = tables.two_ebit_b1c1_branch()
    else:
        from .synth import synthesize_branch
        branch = synthesize_branch("two", d)
    return Step("bob", _two_ebit_round1(d), {
        "B1C1": branch,
        "B1C2": branch.flipped({"a2", "b2"}),
        "B2C1": branch.flipped({"a1", "b1"}),
        "B2C2": branch.flipped({"a1", "b1", "a2", "b2"}),
    })


def build_one_ebit(d: int) -> ProtocolTree:
    _check_d(d, 4)
    fam = with_bells(family(d), ONE_EBIT)
    root = grow(fam.layout, family_states(fam), one_ebit_plan(d))
    return ProtocolTree(f"one-ebit-d{d}", fam.layout, root, ONE_EBIT)


def build_two_ebit(d: int) -> ProtocolTree:
    _check_d(d, 6)
    fam = with_bells(family(d), TWO_EBIT)
    root = grow(fam.layout, family_states(fam), two_ebit_plan(d))
    return ProtocolTree(f"two-ebit-d{d}", fam.layout, root, TWO_EBIT)


def input_family(tree: ProtocolTree):
    """The family (with resources attached) a built-in tree expects."""
    d = tree.layout.register("A").dim
    return with_bells(family(d), tree.resources)
