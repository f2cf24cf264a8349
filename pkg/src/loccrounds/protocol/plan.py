"""Growing protocol trees from measurement plans.

A plan is a tree of Step objects: the measurement to perform and,
optionally, the step to take after each outcome.  Branches without a
planned step are finished automatically by a one-round local
identification (or a pair distinguisher); branches where at most one
state survives become leaves.  Leaf labels are never written by hand:
the states are pushed through the tree while it is built.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from ..qalg import Party, RegisterLayout, apply_local
from .local import NotDistinguishableError, local_identifier, pair_distinguisher
from .model import Leaf, Measurement, Outcome, ProjTerm, Round
from ..states import Ket

LIVE_CUTOFF = 1e-12


class BuildError(RuntimeError):
    pass


COMP = "complement"


def P(**regs) -> ProjTerm:
    return ProjTerm.of(**regs)


def pmk(a: int, sign: int = 1) -> Ket:
    return Ket(a, a + 1, sign)


def pm2(a: int, b: int, sign: int = 1) -> Ket:
    return Ket(a, b, sign)


@dataclass
class Step:
    """Planned measurement: party, [(label, [ProjTerm, ...] or COMP)], next steps by label."""

    party: str
    outcomes: list
    next: dict = field(default_factory=dict)

    def measurement(self, layout: RegisterLayout) -> Measurement:
        outs = []
        for label, terms in self.outcomes:
            if terms == COMP:
                outs.append(Outcome(label, (), complement=True))
            else:
                terms = [terms] if isinstance(terms, ProjTerm) else list(terms)
                outs.append(Outcome(label, tuple(terms)))
        return Measurement.build(layout, self.party, outs).canonical()

    def flipped(self, registers) -> "Step":
        outs = [(l, t if t == COMP else [x.flipped(registers) for x in
                                          ([t] if isinstance(t, ProjTerm) else t)])
                for l, t in self.outcomes]
        nxt = {k: (v.flipped(registers) if isinstance(v, Step) else v) for k, v in self.next.items()}
        return Step(self.party, outs, nxt)


def walgate(prefix: str, r1: str, levels1, r2: str, levels2, **fixed) -> list:
    """The four outcomes P[r1:(x±y), r2:(u±v), fixed...] labelled prefix+pp/pm/mp/mm."""
    out = []
    for s1, t1 in ((1, "p"), (-1, "m")):
        for s2, t2 in ((1, "p"), (-1, "m")):
            regs = dict(fixed)
            regs[r1] = [Ket(levels1[0], levels1[1], s1)]
            regs[r2] = [Ket(levels2[0], levels2[1], s2)]
            out.append((prefix + t1 + t2, [ProjTerm.of(**regs)]))
    return out


def live_states(states: dict[int, np.ndarray]) -> dict[int, np.ndarray]:
    return {l: v for l, v in states.items() if np.vdot(v, v).real > LIVE_CUTOFF}


def child_prefix(party: Party, parent_label: str | None) -> str:
    letter = "A" if party is Party.ALICE else "B"
    if not parent_label:
        return letter
    tail = parent_label[1:] if parent_label[0] in "AB" else parent_label
    return letter + tail


def auto_finish(layout: RegisterLayout, live: dict[int, np.ndarray], last_party: Party | None,
                parent_label: str | None) -> Measurement:
    """One-round identification, preferring the party that did not just measure."""
    order = [Party.ALICE, Party.BOB]
    if last_party is not None:
        order = [last_party.other, last_party]
    for party in order:
        m = local_identifier(layout, live, party, prefix=child_prefix(party, parent_label))
        if m is not None:
            return m
    if len(live) == 2:
        (_, v1), (_, v2) = sorted(live.items())
        # the first call only tells which party measures, which fixes the label prefix
        m = pair_distinguisher(v1, v2, layout, prefix="X")
        m = pair_distinguisher(v1, v2, layout, prefix=child_prefix(m.party, parent_label))
        return m
    raise NotDistinguishableError(f"no one-round finish for states {sorted(live)}")


Planner = Callable[[dict, Party | None, str | None, int], Measurement]


def grow(layout: RegisterLayout, states: dict[int, np.ndarray], plan=None,
         index: int = 1, last_party: Party | None = None, parent_label: str | None = None,
         path=()):
    """Build the subtree for the given live states.

    `plan` is a Step, a planner callable (live, last_party, parent_label,
    index) -> Measurement, or None for an automatic finish.
    """
    live = live_states(states)
    if not live:
        return Leaf(None)
    if len(live) == 1:
        return Leaf(next(iter(live)))
    try:
        if isinstance(plan, Step):
            meas = plan.measurement(layout)
            nxt = plan.next
        elif callable(plan):
            meas = plan(live, last_party, parent_label, index)
            nxt = plan
        else:
            meas = auto_finish(layout, live, last_party, parent_label)
            nxt = {}
    except NotDistinguishableError as exc:
        raise BuildError(f"at {'/'.join(path) or '<root>'}: {exc}") from None
    labels = sorted(live)
    stack = np.array([live[l] for l in labels])
    children = {}
    for outcome, op in zip(meas.outcomes, meas.operators(layout)):
        post = apply_local(op, stack)
        sub = {l: post[i] for i, l in enumerate(labels)}
        sub_plan = nxt.get(outcome.label) if isinstance(nxt, dict) else nxt
        children[outcome.label] = grow(layout, sub, sub_plan, index + 1, meas.party,
                                       outcome.label, path + (outcome.label,))
    return Round(index, meas, children)


def family_states(fam) -> dict[int, np.ndarray]:
    return {s.label: s.vector.amplitudes / s.vector.norm() for s in fam.states}
