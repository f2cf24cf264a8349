import numpy as np
import pytest

from loccrounds.protocol import (Leaf, Measurement, Outcome, ProjTerm, ProtocolTree, Round,
                                 build_one_ebit, build_two_ebit, execute, input_family,
                                 local_identifier, pair_distinguisher, rounds, validate)
from loccrounds.protocol.plan import BuildError
from loccrounds.protocol.synth import synthesize_branch
from loccrounds.qalg import LayoutError, Party, StateVector
from loccrounds.states import family, with_bells

from conftest import builtin, builtin_report, subset

P = ProjTerm.of


def two_outcome_tree(layout, party, first, children):
    meas = Measurement.build(layout, party, [Outcome("X1", (first,)),
                                             Outcome("X2", (), complement=True)])
    return ProtocolTree("t", layout, Round(1, meas, children))


def test_projterm_matrix_and_text():
    layout = family(2).layout
    t = P(A=[0], B=0)
    assert str(t) == "proj[A:0, B:0]"
    m = t.matrix(("A", "B"), layout)
    assert m[0, 0] == 1 and np.trace(m) == 1


def test_complement_completes_the_measurement():
    layout = family(4).layout
    meas = Measurement.build(layout, "alice", [Outcome("A1", (P(A=[0, 1]),)),
                                               Outcome("A2", (), complement=True)])
    mats = meas.matrices(layout)
    assert np.allclose(sum(m.conj().T @ m for m in mats), np.eye(4))


def test_validator_finds_orphan_outcome():
    layout = family(2).layout
    tree = two_outcome_tree(layout, "alice", P(A=0), {"X1": Leaf(1)})
    assert any("orphan outcome X2" in p for p in validate(tree))


def test_validator_finds_wrong_party_and_incomplete_round():
    layout = family(2).layout
    tree = two_outcome_tree(layout, "bob", P(A=0), {"X1": Leaf(1), "X2": Leaf(2)})
    assert validate(tree)
    meas = Measurement.build(layout, "alice", [Outcome("X1", (P(A=0),))])
    tree = ProtocolTree("t", layout, Round(1, meas, {"X1": Leaf(1)}))
    assert any("completeness" in p for p in validate(tree))


def test_validator_checks_round_indices():
    layout = family(2).layout
    inner = two_outcome_tree(layout, "bob", P(B=0), {"X1": Leaf(1), "X2": Leaf(2)}).root
    tree = two_outcome_tree(layout, "alice", P(A=0), {"X1": inner, "X2": Leaf(3)})
    assert any("round index" in p for p in validate(tree))


def test_tree_that_never_measures_has_success_zero():
    fam = family(2)
    report = execute(ProtocolTree("none", fam.layout, Leaf(None)), fam)
    assert report.success_probability == 0.0 and report.max_rounds == 0
    assert all(report.per_state[l] == pytest.approx({"fail": 1.0}) for l in fam.labels)


def test_layout_mismatch_is_rejected():
    with pytest.raises(LayoutError):
        execute(builtin("one-ebit", 6), family(6))


def test_probability_is_conserved_per_input():
    report = builtin_report("two-ebit", 6)
    for leaves in report.per_state.values():
        assert sum(leaves.values()) == pytest.approx(1.0, abs=1e-9)


def test_phi16_reaches_its_leaf_through_b23():
    tree = builtin("one-ebit", 6)
    rep = execute(tree, subset(input_family(tree), {16}))
    assert rep.node_mass[("B1", "A2", "B23")] == pytest.approx(0.5)
    assert rep.node_mass[("B2", "A2", "B23")] == pytest.approx(0.5)


def test_phi27_is_identified_by_the_fifth_outcome_after_b142():
    tree = builtin("two-ebit", 6)
    rep = execute(tree, subset(input_family(tree), {27}))
    leaves = [p for p, m in rep.node_mass.items() if m > 1e-12 and p and p[-1].startswith("A142")]
    assert leaves and all(p[1] == "A14" and p[-1].endswith("5") for p in leaves)
    assert sum(rep.node_mass[p] for p in leaves) == pytest.approx(1.0)


def test_non_orthogonal_input_is_not_discriminated():
    tree = builtin("one-ebit", 6)
    fam = family(6)
    fam = fam.replace(2, StateVector(fam.layout, fam.by_label(1).vector.amplitudes
                                     + 0.3 * fam.by_label(2).vector.amplitudes))
    report = execute(tree, with_bells(fam, tree.resources))
    assert report.success_probability < 1 - 1e-9


def test_ancilla_flip_mirrors_the_first_branch():
    tree = builtin("one-ebit", 6)
    left, right = tree.root.children["B1"], tree.root.children["B2"]
    assert left.measurement.flipped({"a", "b"}) == right.measurement
    assert rounds(left) == rounds(right)


def test_two_ebit_needs_d_at_least_six():
    with pytest.raises(ValueError):
        build_two_ebit(4)
    with pytest.raises(ValueError):
        build_one_ebit(5)


@pytest.mark.parametrize("kind,d,budget", [("one", 4, 2), ("one", 6, 4), ("two", 6, 2)])
def test_no_shorter_continuation_in_the_search_space(kind, d, budget):
    with pytest.raises(BuildError):
        synthesize_branch(kind, d, budget)


def test_local_identifier_and_pair_distinguisher():
    fam = family(2)
    live = {s.label: s.vector.amplitudes for s in fam if s.label in (3, 4)}
    m = local_identifier(fam.layout, live, Party.BOB, prefix="B")
    assert m is not None and m.party is Party.BOB and len(m.outcomes) == 2
    a, b = fam.by_label(1).vector.amplitudes, fam.by_label(3).vector.amplitudes
    pd = pair_distinguisher(a, b, fam.layout)
    assert pd.party is Party.ALICE and pd.outcomes[-1].complement


def test_raw_matrix_outcomes_execute():
    layout = family(2).layout
    meas = Measurement(Party.ALICE, ("A",), (Outcome("X1", raw=np.diag([1.0, 0.0])),
                                             Outcome("X2", (), complement=True)))
    tree = ProtocolTree("raw", layout, Round(1, meas, {"X1": Leaf(1), "X2": Leaf(3)}))
    assert validate(tree) == []
    rep = execute(tree, family(2))
    assert rep.per_state[1] == pytest.approx({"1": 1.0})
