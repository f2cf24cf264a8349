"""One test per acceptance criterion; pytest prints a PASS/FAIL line for each at the end."""

import random
import time

import numpy as np
import pytest

from loccrounds import dsl
from loccrounds.cli import main
from loccrounds.opm import opm_space, round_lower_bound
from loccrounds.protocol import execute, input_family, rounds, validate
from loccrounds.qalg import Party
from loccrounds.states import family, verify_orthonormal_basis

from conftest import BUILTIN_SPECS, builtin, builtin_report, corrupt, nonzero_entry, round_paths, subset

ALL = pytest.mark.parametrize("kind,d", BUILTIN_SPECS, ids=[f"{k}-{d}" for k, d in BUILTIN_SPECS])


@pytest.mark.parametrize("d", [2, 4, 6, 8])
def test_criterion_1_basis_property(d, tmp_path, capsys):
    t0 = time.perf_counter()
    assert main(["generate", "--d", str(d), "--out", str(tmp_path / "f.json")]) == 0
    elapsed = time.perf_counter() - t0
    out = capsys.readouterr().out
    assert out.startswith(f"{d * d} states") and "is_basis true" in out
    rep = verify_orthonormal_basis(family(d))
    assert rep.n_states == d * d and rep.gram_rank == d * d
    assert rep.max_offdiag < 1e-10
    assert elapsed < 1.0


def _span_projector(mats):
    v = np.array([m.reshape(-1) for m in mats]).T
    q, _ = np.linalg.qr(v)
    return q @ q.conj().T


def test_criterion_2_opm_structure():
    t0 = time.perf_counter()
    fam = family(6)
    alice = opm_space(fam, Party.ALICE)
    bob = opm_space(fam, Party.BOB)
    elapsed = time.perf_counter() - t0
    assert alice.dim == 2
    target = [np.diag([1, 0, 0, 0, 0, 0]).astype(complex), np.diag([0, 1, 1, 1, 1, 1]).astype(complex)]
    dist = np.linalg.norm(_span_projector(alice.matrices()) - _span_projector(target), 2)
    assert dist < 1e-8
    assert bob.dim == 1
    assert elapsed < 5.0


def _check_isolation_pattern(node):
    if not node.children:
        return
    n = node.support_dim
    if len(node.children) == 2 and any(c.children for c in node.children):
        assert sorted(node.projector_ranks) == [1, n - 1]
        assert sorted(len(c.labels) for c in node.children)[0] < len(node.labels)
    else:
        assert all(len(c.labels) == 1 for c in node.children)
    for c in node.children:
        _check_isolation_pattern(c)


@pytest.mark.parametrize("d,expected", [(2, 2), (4, 6), (6, 10)])
def test_criterion_3_lower_bound(d, expected, tmp_path, capsys):
    t0 = time.perf_counter()
    code = main(["bound", "--d", str(d), "--out", str(tmp_path / "trace.json")])
    elapsed = time.perf_counter() - t0
    assert code == 0
    assert f"lower bound: {expected}" in capsys.readouterr().out
    bound, trace = round_lower_bound(family(d))
    assert bound == expected == trace.rounds
    _check_isolation_pattern(trace.root)
    assert elapsed < 60.0


@pytest.mark.parametrize("d", [2, 4, 6, 8])
def test_criterion_4_plain_protocol(d):
    tree = builtin("plain", d)
    assert validate(tree) == []
    report = builtin_report("plain", d)
    assert report.success_probability >= 1 - 1e-9
    assert rounds(tree) == 2 * d - 2 == report.max_rounds


def _outcome(tree, path):
    node = tree.root
    for lab in path[:-1]:
        node = node.children[lab]
    return {o.label: o for o in node.measurement.outcomes}[path[-1]]


@pytest.mark.parametrize("d", [4, 6, 8])
def test_criterion_5_one_ebit_protocol(d):
    tree = builtin("one-ebit", d)
    report = builtin_report("one-ebit", d)
    assert validate(tree) == []
    assert report.success_probability >= 1 - 1e-9
    if d == 6:
        assert rounds(tree) == 6
        assert _outcome(tree, ("B1",)).describe() == "proj[B:0,1,2, b:0] + proj[B:3,4,5, b:1]"
        report16 = execute(tree, subset(input_family(tree), {16}))
        mass = sum(report16.node_mass.get((first, "A2", "B23"), 0.0) for first in ("B1", "B2"))
        assert mass == pytest.approx(1.0, abs=1e-9)
        assert report16.per_state[16] == pytest.approx({"16": 1.0}, abs=1e-9)
    else:
        assert rounds(tree) <= d


@pytest.mark.parametrize("d", [6, 8])
def test_criterion_6_two_ebit_protocol(d):
    tree = builtin("two-ebit", d)
    report = builtin_report("two-ebit", d)
    assert validate(tree) == []
    assert report.success_probability >= 1 - 1e-9
    if d == 6:
        assert rounds(tree) == 4
    else:
        assert rounds(tree) <= d - 2


@pytest.mark.parametrize("d", [2, 4, 6])
def test_criterion_7_cross_check(d):
    bound, _ = round_lower_bound(family(d))
    assert rounds(builtin("plain", d)) == bound


@ALL
def test_criterion_8_orthogonality_at_every_node(kind, d):
    report = builtin_report(kind, d)
    assert report.max_branch_overlap < 1e-9


@ALL
def test_criterion_9_dsl_round_trip(kind, d):
    tree = builtin(kind, d)
    text = dsl.serialize(tree)
    back = dsl.parse(text)
    assert back == tree
    assert dsl.serialize(back) == text
    again = execute(back, input_family(tree))
    assert again.max_difference(builtin_report(kind, d)) <= 1e-12


TINY = """protocol "tiny" {
  registers { A: alice dim 2; B: bob dim 2; a: alice dim 2; b: bob dim 2; }  # comment
  resource bell(a, b);
  round 1 by bob {
    outcome B1 = proj[B:0, b:0] + proj[B:1, b:1] => round 2 by alice {
      outcome A1 = proj[A:(0-1), a:0,1] => identify 1;
      outcome A2 = complement => fail;
    }
    outcome B2 = complement => identify 2;
  }
}
"""


def test_criterion_9_dsl_round_trip_fuzz():
    sources = [dsl.serialize(builtin("plain", 2)), TINY]
    rng = random.Random(7)
    diagnostics = 0
    for n in range(10_000):
        text = sources[n % 2]
        toks = dsl.tokenize(text)[:-1]
        drop = sorted(rng.sample(range(len(toks)), rng.choice([1, 1, 2, 3])), reverse=True)
        mutated = text
        for i in drop:
            t = toks[i]
            mutated = mutated[:t.end - len(t.value)] + mutated[t.end:]
        try:
            dsl.parse(mutated)
        except dsl.DslError as exc:
            assert exc.line >= 1 and exc.col >= 1
            diagnostics += 1
    assert diagnostics > 9_000


@ALL
def test_criterion_10_negative_controls(kind, d):
    tree = builtin(kind, d)
    rng = np.random.default_rng(d)
    paths = round_paths(tree)
    picks = [paths[0]] + [paths[i] for i in rng.choice(len(paths), size=min(6, len(paths)), replace=False)]
    for path in picks:
        node = tree.root
        for lab in path:
            node = node.children[lab]
        mats = node.measurement.matrices(tree.layout)
        for k in range(len(mats)):
            entry = nonzero_entry(rng, mats[k]) if k % 2 == 0 else (
                int(rng.integers(len(mats[k]))), int(rng.integers(len(mats[k]))))
            bad = corrupt(tree, path, k, entry)
            problems = validate(bad)
            if problems:
                assert any("complete" in p for p in problems)
                continue
            assert execute(bad, input_family(tree)).success_probability < 1 - 1e-9
