import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from loccrounds.qalg import (LayoutError, LocalOperator, Party, RegisterLayout, StateVector,
                             apply_local, eig_hermitian, embed, hermitian_from_params,
                             hermitian_params, inner, is_projector, nullspace, schmidt_rank,
                             tensor)

AB = RegisterLayout.of(("A", Party.ALICE, 3), ("B", Party.BOB, 2))


def random_complex(rng, n):
    return rng.standard_normal(n) + 1j * rng.standard_normal(n)


def test_layout_basics():
    assert AB.names == ("A", "B") and AB.dims == (3, 2) and AB.total_dim == 6
    assert AB.flat_index({"A": 2, "B": 1}) == 5
    assert AB.party_registers(Party.BOB) == ("B",)
    assert RegisterLayout.from_json(AB.to_json()) == AB


def test_layout_rejects_duplicates_and_small_dims():
    with pytest.raises(LayoutError):
        RegisterLayout.of(("A", "alice", 2), ("A", "bob", 2))
    with pytest.raises(LayoutError):
        RegisterLayout.of(("A", "alice", 1))


def test_normalized_flag_is_enforced():
    with pytest.raises(ValueError):
        StateVector(AB, np.ones(6), normalized=True)
    v = StateVector(AB, np.ones(6) / np.sqrt(6), normalized=True)
    assert v.norm() == pytest.approx(1.0)


def test_basis_and_product_states():
    e = StateVector.basis(AB, {"A": 1, "B": 0})
    assert e.amplitudes[AB.flat_index({"A": 1, "B": 0})] == 1
    p = StateVector.product(AB, {"A": np.array([1, 1, 0]), "B": np.array([0, 1])})
    assert schmidt_rank(p, (["A"], ["B"])) == 1
    bell = StateVector(RegisterLayout.of(("a", "alice", 2), ("b", "bob", 2)),
                       np.array([1, 0, 0, 1]) / np.sqrt(2))
    assert schmidt_rank(bell, (["a"], ["b"])) == 2


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_tensor_is_multiplicative_on_inner_products(seed):
    rng = np.random.default_rng(seed)
    other = RegisterLayout.of(("c", "alice", 2))
    x1, x2 = (StateVector(AB, random_complex(rng, 6)) for _ in range(2))
    y1, y2 = (StateVector(other, random_complex(rng, 2)) for _ in range(2))
    lhs = inner(tensor(x1, y1), tensor(x2, y2))
    assert lhs == pytest.approx(inner(x1, x2) * inner(y1, y2))


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_apply_local_matches_embedded_matrix(seed):
    rng = np.random.default_rng(seed)
    layout = RegisterLayout.of(("A", "alice", 2), ("B", "bob", 3), ("a", "alice", 2))
    m = random_complex(rng, 16).reshape(4, 4)
    op = LocalOperator(("A", "a"), m, layout)
    states = random_complex(rng, 3 * 12).reshape(3, 12)
    full = embed(op, layout)
    assert np.allclose(apply_local(op, states), states @ full.T)


def test_local_operator_reports_parties():
    assert LocalOperator(("A", "B"), np.eye(6), AB).parties == {Party.ALICE, Party.BOB}
    with pytest.raises(LayoutError):
        LocalOperator(("C",), np.eye(2), AB)


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 5), st.integers(0, 2**32 - 1))
def test_hermitian_params_round_trip(n, seed):
    rng = np.random.default_rng(seed)
    h = random_complex(rng, n * n).reshape(n, n)
    h = h + h.conj().T
    params = hermitian_params(h)
    assert len(params) == n * n
    assert np.allclose(hermitian_from_params(params, n), h)
    # the parametrization is an isometry for the Frobenius inner product
    assert np.linalg.norm(params) == pytest.approx(np.linalg.norm(h))


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 6), st.integers(2, 8), st.integers(0, 2**32 - 1))
def test_nullspace_is_orthonormal_and_annihilated(r, c, seed):
    rng = np.random.default_rng(seed)
    rows = rng.standard_normal((r, c)) @ np.diag(rng.integers(0, 2, c))
    ns = nullspace(rows, ncols=c)
    assert np.allclose(rows @ ns.T, 0, atol=1e-9)
    assert np.allclose(ns @ ns.conj().T, np.eye(len(ns)), atol=1e-9)
    assert len(ns) == c - np.linalg.matrix_rank(rows)


def test_eig_hermitian_rejects_non_hermitian():
    with pytest.raises(ValueError):
        eig_hermitian(np.array([[0, 1], [0, 0]]))
    w, _ = eig_hermitian(np.diag([2.0, 1.0]))
    assert list(w) == [1.0, 2.0]


def test_is_projector():
    assert is_projector(np.diag([1, 0, 1]))
    assert not is_projector(np.diag([1, 0.5]))
