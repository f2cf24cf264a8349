import numpy as np
import pytest

from loccrounds.opm import (TrivialSpaceError, finest_projective_opm, is_trivial, opm_space,
                            round_lower_bound, verify_opm_preserves)
from loccrounds.qalg import Party
from loccrounds.states import family


@pytest.mark.parametrize("d", [2, 4, 6])
def test_alice_space_has_dim_two_and_bob_is_trivial(d):
    fam = family(d)
    alice = opm_space(fam, Party.ALICE)
    assert alice.dim == 2 and not is_trivial(alice)
    if d > 2:
        bob = opm_space(fam, "bob")
        assert bob.dim == 1 and is_trivial(bob)


def test_identity_is_always_in_the_space():
    space = opm_space(family(4), Party.ALICE)
    basis = np.array([m.reshape(-1) for m in space.matrices()])
    eye = np.eye(4).reshape(-1)
    coeffs, *_ = np.linalg.lstsq(basis.T, eye, rcond=None)
    assert np.allclose(basis.T @ coeffs, eye)


def test_finest_opm_isolates_the_first_row():
    projectors = finest_projective_opm(opm_space(family(6), Party.ALICE), seed=42)
    assert [int(round(np.trace(p).real)) for p in projectors] == [1, 5]
    assert np.allclose(projectors[0], np.diag([1, 0, 0, 0, 0, 0]))
    assert np.allclose(sum(projectors), np.eye(6))


def test_finest_opm_is_seed_stable():
    space = opm_space(family(6), Party.ALICE)
    a = finest_projective_opm(space, seed=1)
    b = finest_projective_opm(space, seed=12345)
    assert all(np.allclose(x, y) for x, y in zip(a, b))


def test_trivial_space_has_no_finest_opm():
    with pytest.raises(TrivialSpaceError):
        finest_projective_opm(opm_space(family(6), Party.BOB))


def test_space_elements_preserve_orthogonality():
    fam = family(4)
    space = opm_space(fam, Party.ALICE)
    assert verify_opm_preserves(space, fam, samples=50, seed=3) < 1e-9


def test_lower_bound_trace_alternates_parties():
    bound, trace = round_lower_bound(family(6))
    assert bound == 10
    chain, node = [], trace.root
    while node.children:
        chain.append(node.party)
        node = max(node.children, key=lambda c: c.rounds)
    assert all(a != b for a, b in zip(chain, chain[1:]))
    assert trace.to_json()["rounds"] == 10 and trace.seed == 42


def test_lower_bound_is_seed_independent():
    assert round_lower_bound(family(4), seed=7)[0] == round_lower_bound(family(4), seed=8)[0] == 6
