import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from annrr import ContractError, Tolerances, matrix_rank, projector, pseudo_inverse, sym_eig, thin_svd
from annrr.linalg import as_matrix, singular_values

from conftest import eig_singular_values, make_rng

finite = st.floats(-1e3, 1e3, allow_nan=False, allow_infinity=False)
matrices = st.tuples(st.integers(1, 6), st.integers(1, 6)).flatmap(
    lambda s: arrays(np.float64, s, elements=finite)
)


def test_diagonal_svd_is_identity_frame():
    f = thin_svd(np.diag([3.0, 1.0]))
    np.testing.assert_allclose(f.d, [3.0, 1.0])
    np.testing.assert_allclose(np.abs(f.u), np.eye(2), atol=1e-15)
    np.testing.assert_allclose(np.abs(f.v), np.eye(2), atol=1e-15)


def test_zero_matrix_svd():
    f = thin_svd(np.zeros((2, 2)))
    np.testing.assert_array_equal(f.d, [0.0, 0.0])
    np.testing.assert_array_equal(f.reconstruct(), np.zeros((2, 2)))


def test_random_svd_matches_eigensolver(rng):
    m = rng.standard_normal((5, 3))
    f = thin_svd(m)
    assert np.linalg.norm(f.reconstruct() - m) <= 1e-10 * np.linalg.norm(m)
    np.testing.assert_allclose(f.d, eig_singular_values(m), rtol=1e-10)
    np.testing.assert_allclose(f.u.T @ f.u, np.eye(3), atol=1e-12)
    np.testing.assert_allclose(f.v.T @ f.v, np.eye(3), atol=1e-12)


def test_svd_signs_are_canonical_and_reproducible(rng):
    m = rng.standard_normal((6, 4))
    a, b = thin_svd(m), thin_svd(m.copy())
    np.testing.assert_array_equal(a.u, b.u)
    np.testing.assert_array_equal(a.v, b.v)
    for j in range(4):
        col = a.u[:, j]
        first = col[np.flatnonzero(np.abs(col) > 1e-8 * np.abs(col).max())[0]]
        assert first > 0
    flipped = thin_svd(-m)
    np.testing.assert_allclose(flipped.reconstruct(), -m, atol=1e-12)


@settings(max_examples=60, deadline=None)
@given(matrices)
def test_frobenius_equals_singular_value_energy(m):
    d = singular_values(m)
    fro2 = float(np.sum(m**2))
    assert abs(fro2 - float(np.sum(d**2))) <= 1e-10 * max(fro2, 1e-300)


def test_von_neumann_and_weyl_inequalities():
    rng = make_rng(3)
    for _ in range(200):
        a = rng.standard_normal((5, 4))
        b = rng.standard_normal((5, 4))
        da, db = singular_values(a), singular_values(b)
        assert np.trace(a @ b.T) <= float(da @ db) + 1e-8
        assert np.all(np.abs(singular_values(a + b) - da) <= db[0] + 1e-12)


def test_sym_eig_examples(rng):
    vals, _ = sym_eig(np.diag([1.0, 4.0]))
    np.testing.assert_allclose(vals, [4.0, 1.0])
    vals, vecs = sym_eig(np.eye(3))
    np.testing.assert_allclose(vals, 1.0)
    np.testing.assert_allclose(vecs.T @ vecs, np.eye(3), atol=1e-14)
    a = rng.standard_normal((3, 3))
    s = a + a.T
    vals, vecs = sym_eig(s)
    assert np.all(np.diff(vals) <= 0)
    off = vecs.T @ s @ vecs - np.diag(vals)
    assert np.max(np.abs(off)) <= 1e-8


def test_sym_eig_rejects_asymmetric():
    with pytest.raises(ContractError):
        sym_eig(np.array([[1.0, 2.0], [0.0, 1.0]]))
    with pytest.raises(ContractError):
        sym_eig(np.ones((2, 3)))


def test_pseudo_inverse_examples(rng):
    np.testing.assert_allclose(pseudo_inverse(np.diag([2.0, 0.0])), np.diag([0.5, 0.0]))
    a = np.array([[2.0, 1.0], [1.0, 3.0]])
    np.testing.assert_allclose(pseudo_inverse(a), np.linalg.inv(a), rtol=1e-12)


def test_penrose_identities_rank_deficient(rng):
    m = rng.standard_normal((4, 2)) @ rng.standard_normal((2, 3))
    g = pseudo_inverse(m)
    scale = np.linalg.norm(m)
    assert np.linalg.norm(m @ g @ m - m) <= 1e-8 * scale
    assert np.linalg.norm(g @ m @ g - g) <= 1e-8 * np.linalg.norm(g)
    assert np.linalg.norm((m @ g).T - m @ g) <= 1e-8
    assert np.linalg.norm((g @ m).T - g @ m) <= 1e-8


def test_projector_examples(rng):
    np.testing.assert_allclose(projector(np.eye(4)), np.eye(4), atol=1e-14)
    x = rng.standard_normal((6, 1))
    np.testing.assert_allclose(projector(x), x @ x.T / float(np.sum(x**2)), atol=1e-14)
    xr = rng.standard_normal((12, 3)) @ rng.standard_normal((3, 7))
    p = projector(xr)
    assert abs(np.trace(p) - 3) <= 1e-6
    np.testing.assert_allclose(p @ p, p, atol=1e-12)
    # same matrix as the textbook X (X^T X)^- X^T
    textbook = xr @ np.linalg.pinv(xr.T @ xr, rcond=1e-10) @ xr.T
    np.testing.assert_allclose(p, textbook, atol=1e-8)


def test_matrix_rank_examples():
    assert matrix_rank(np.zeros((3, 3))) == 0
    assert matrix_rank(np.eye(3)) == 3
    rng = make_rng(11)
    for _ in range(100):
        c = rng.standard_normal((25, 10)) @ rng.standard_normal((25, 10)).T
        assert matrix_rank(0.3 * c) == 10


def test_tolerances_are_overridable():
    t = Tolerances().with_(rank_rtol=0.5)
    assert matrix_rank(np.diag([1.0, 0.4]), tol=t) == 1
    assert matrix_rank(np.diag([1.0, 0.4]), rel_tol=0.3) == 2


@pytest.mark.parametrize("bad", [np.array([[1.0, np.nan]]), np.array([[np.inf]]), np.zeros((0, 2)), np.zeros((2, 2, 2))])
def test_as_matrix_rejects_bad_input(bad):
    with pytest.raises(ContractError):
        as_matrix(bad)


def test_as_matrix_promotes_vectors():
    assert as_matrix([1.0, 2.0, 3.0]).shape == (3, 1)
