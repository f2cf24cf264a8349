"""Measurement tables for the entanglement-assisted protocols at d = 6.

Only the branch after Bob's first outcome (B1, resp. B1 and C1) is
written out.  The other branches follow from it by exchanging |0> and |1>
on the ancilla pairs whose correlation Bob's first outcome flipped.

Departures from a literal reading of the tables, all checked by running
the resulting trees:

* Where a pair of states entangled with an ancilla pair is to be told
  apart by Alice measuring her ancilla in the ± basis, Bob first measures
  his level pair and his ancilla in the product ± basis (four outcomes).
  Without that step Alice's ± measurement leaves the two states
  overlapping.  Alice's follow-up tables are used unchanged.
* Outcomes that do not add up to the identity get the remainder folded
  into their last outcome, written as the complement.
* Branches the tables only describe in words ("distinguished by
  projecting onto ...") are finished automatically by whichever party
  can identify the states in one measurement.
"""

from __future__ import annotations

from .plan import COMP, P, Step, pm2, pmk, walgate

ALICE, BOB = "alice", "bob"
PM = ("pp", "pm", "mp", "mm")


def with_complement_last(outcomes: list) -> list:
    label, _ = outcomes[-1]
    return outcomes[:-1] + [(label, COMP)]


def one_ebit_b1_branch() -> Step:
    """Rounds 2 to 6 of the one-ebit protocol after outcome B1."""
    b3_1 = Step(BOB, with_complement_last(
        [("B11", P(B=pmk(0), b=0)), ("B12", P(B=pmk(0, -1), b=0)),
         ("B13", P(B=pmk(4), b=1)), ("B14", P(B=pmk(4, -1), b=1))]
        + walgate("B15", "B", (2, 3), "b", (0, 1))),
        {f"B15{s}": Step(ALICE, [(f"A15{s}1", P(A=0, a=pm2(0, 1))),
                                 (f"A15{s}2", COMP)])
         for s in PM})
    b3_2 = Step(BOB, [("B21", P(B=pmk(3), b=1)), ("B22", P(B=pmk(3, -1), b=1)),
                      ("B23", COMP)])
    b3_3 = Step(BOB, [("B31", P(B=pmk(3), b=1)), ("B32", P(B=pmk(3, -1), b=1)),
                      ("B33", COMP)])
    b3_4 = Step(BOB, [("B41", P(B=3, b=1)), ("B42", COMP)], {
        "B41": Step(ALICE, [("A411", P(A=pmk(4), a=1)), ("A412", COMP)]),
        "B42": Step(ALICE, [("A421", P(A=4, a=1)), ("A422", COMP)], {
            "A421": Step(BOB, [("B4211", P(B=pmk(4), b=1)), ("B4212", COMP)]),
            "A422": Step(BOB, [("B4221", P(B=4, b=1)), ("B4222", COMP)]),
        }),
    })
    a6_5422 = {f"B5422{s}": Step(ALICE, [
        (f"A5422{s}1", P(A=2, a=pm2(0, 1))), (f"A5422{s}2", P(A=2, a=pm2(0, 1, -1))),
        (f"A5422{s}3", P(A=pmk(3), a=0)), (f"A5422{s}4", P(A=pmk(3, -1), a=0)),
        (f"A5422{s}5", COMP)]) for s in PM}
    b5_542 = Step(BOB, with_complement_last(
        [("B5421", P(B=1, b=0))] + walgate("B5422", "B", (2, 3), "b", (0, 1))),
        {"B5421": Step(ALICE, [("A54211", P(A=pmk(2), a=0)), ("A54212", P(A=pmk(2, -1), a=0)),
                               ("A54213", P(A=pmk(4), a=0)), ("A54214", COMP)]),
         **a6_5422})
    b3_5 = Step(BOB, [("B51", P(B=0, b=0)), ("B52", P(B=pmk(4), b=1)),
                      ("B53", P(B=pmk(4, -1), b=1)), ("B54", COMP)], {
        "B51": Step(ALICE, [("A511", P(A=pmk(1), a=0)), ("A512", P(A=pmk(1, -1), a=0)),
                            ("A513", P(A=pmk(3), a=0)), ("A514", P(A=pmk(3, -1), a=0)),
                            ("A515", COMP)]),
        "B54": Step(ALICE, [("A541", P(A=1, a=0)), ("A542", COMP)], {
            "A541": Step(BOB, [("B5411", P(B=pmk(1), b=0)), ("B5412", COMP)]),
            "A542": b5_542,
        }),
    })
    return Step(ALICE, [("A1", P(A=0)), ("A2", P(A=1, a=1)), ("A3", P(A=3, a=1)),
                        ("A4", P(A=[4, 5], a=1)), ("A5", COMP)],
                {"A1": b3_1, "A2": b3_2, "A3": b3_3, "A4": b3_4, "A5": b3_5})


def two_ebit_b1c1_branch() -> Step:
    """Rounds 2 to 4 of the two-ebit protocol after outcomes B1 and C1."""
    def a2_finish(prefix):
        return {f"{prefix}{s}": Step(ALICE, [(f"A{prefix[1:]}{s}1", P(a2=pm2(0, 1))),
                                             (f"A{prefix[1:]}{s}2", COMP)]) for s in PM}

    def a1_finish(prefix):
        return {f"{prefix}{s}": Step(ALICE, [(f"A{prefix[1:]}{s}1", P(a1=pm2(0, 1))),
                                             (f"A{prefix[1:]}{s}2", COMP)]) for s in PM}

    b3_1 = Step(BOB, with_complement_last(
        walgate("B11", "B", (0, 1), "b2", (0, 1), b1=0)
        + walgate("B12", "B", (2, 3), "b1", (0, 1), b2=1)
        + [("B13", P(B=pmk(4), b1=1, b2=0)), ("B14", P(B=pmk(4, -1), b1=1, b2=0))]),
        {**a2_finish("B11"), **a1_finish("B12")})
    b3_7 = Step(BOB, with_complement_last(
        [("B71", P(B=pmk(1), b1=0, b2=1)), ("B72", P(B=pmk(1, -1), b1=0, b2=1))]
        + walgate("B73", "B", (3, 4), "b2", (0, 1), b1=1)
        + [("B74", P(B=5, b1=1, b2=0))]),
        a2_finish("B73"))
    b3_9 = Step(BOB, with_complement_last(
        walgate("B91", "B", (3, 4), "b2", (0, 1), b1=1) + [("B92", P(B=5, b1=1, b2=0))]),
        a2_finish("B91"))
    a4_142 = {f"B142{s}": Step(ALICE, [
        (f"A142{s}1", P(A=pmk(3), a1=0, a2=1)), (f"A142{s}2", P(A=pmk(3, -1), a1=0, a2=1)),
        (f"A142{s}3", P(A=2, a1=pm2(0, 1), a2=1)), (f"A142{s}4", P(A=2, a1=pm2(0, 1, -1), a2=1)),
        (f"A142{s}5", COMP)]) for s in PM}
    b3_14 = Step(BOB, with_complement_last(
        [("B141", P(B=1, b1=0, b2=1))] + walgate("B142", "B", (2, 3), "b1", (0, 1), b2=1)),
        a4_142)
    return Step(ALICE, [
        ("A1", P(A=0)),
        ("A2", P(A=pmk(1), a1=0, a2=0)), ("A3", P(A=pmk(1, -1), a1=0, a2=0)),
        ("A4", P(A=pmk(3), a1=0, a2=0)), ("A5", P(A=pmk(3, -1), a1=0, a2=0)),
        ("A6", P(A=5, a1=0, a2=0)),
        ("A7", [P(A=1, a1=1), P(A=1, a1=0, a2=1)]),
        ("A8", P(A=2, a1=1, a2=0)),
        ("A9", P(A=3, a1=1)),
        ("A10", P(A=pmk(4), a1=1, a2=1)), ("A11", P(A=pmk(4, -1), a1=1, a2=1)),
        ("A12", P(A=4, a1=1, a2=0)), ("A13", P(A=5, a1=1, a2=0)),
        ("A14", COMP),
    ], {"A1": b3_1, "A7": b3_7, "A9": b3_9, "A14": b3_14})
