import itertools
import warnings

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from chirallab.exceptions import BadOrder, IllConditioned, NotHermitian, RankDeficient, Singular
from chirallab.linalg import (dagger_inv, elementary_symmetric, herm_eig, log_wedge_norm, opnorm,
                              qr_pos, singular_values, solve, wedge_norm)
from chirallab.symplectic import j_matrix
from conftest import ginibre

seeds = st.integers(0, 2**32 - 1)


def test_qr_identity():
    q, r = qr_pos(np.eye(4))
    assert np.array_equal(q, np.eye(4))
    assert np.array_equal(r, np.eye(4))


def test_qr_sign_goes_to_q():
    q, r = qr_pos(np.diag([-2.0, 1.0]))
    assert np.allclose(q, np.diag([-1, 1]), atol=1e-15)
    assert np.allclose(r, np.diag([2, 1]), atol=1e-15)


def test_qr_round_trip_ginibre(rng):
    m = ginibre(rng, 3)
    q, r = qr_pos(m)
    assert np.abs(q @ r - m).max() <= 1e-12
    assert np.all(np.tril(r, -1) == 0)
    assert np.all(np.diag(r).imag == 0) and np.all(np.diag(r).real > 0)


@pytest.mark.parametrize("n", [2, 4, 8])
def test_qr_round_trip_many(n):
    rng = np.random.default_rng(n)
    m = (rng.standard_normal((1000, n, n)) + 1j * rng.standard_normal((1000, n, n))) / np.sqrt(2)
    q, r = qr_pos(m)
    err = np.abs(q @ r - m).max(axis=(-2, -1)) / np.array([opnorm(x) for x in m])
    assert err.max() <= 1e-12
    unit = np.abs(np.conj(np.swapaxes(q, -1, -2)) @ q - np.eye(n)).max()
    assert unit <= 1e-12 * n


def test_qr_rank_deficient():
    with pytest.raises(RankDeficient):
        qr_pos(np.zeros((2, 2)))


def test_singular_values_examples():
    assert np.allclose(singular_values(np.diag([3, 2j, -1])), [3, 2, 1])
    assert np.allclose(singular_values(j_matrix(1)), [1, 1])


@given(seeds)
def test_singular_values_det_and_inverse(seed):
    rng = np.random.default_rng(seed)
    m = ginibre(rng, 4) + 2 * np.eye(4)
    sv = singular_values(m)
    assert np.all(np.diff(sv) <= 0) and np.all(sv >= 0)
    assert np.prod(sv) == pytest.approx(abs(np.linalg.det(m)), rel=1e-8)
    assert np.allclose(1 / sv[::-1], singular_values(np.linalg.inv(m)), rtol=1e-8)


def test_wedge_norm_examples(rng):
    assert wedge_norm(np.diag([3.0, 2.0, 1.0]), 2) == pytest.approx(6)
    assert wedge_norm(ginibre(rng, 3), 0) == 1.0
    with pytest.raises(BadOrder):
        wedge_norm(np.eye(2), 3)
    with pytest.raises(BadOrder):
        log_wedge_norm(np.eye(2), -1)


@given(seeds)
def test_wedge_norm_bound_unit_determinant(seed):
    rng = np.random.default_rng(seed)
    m = ginibre(rng, 4)
    m = m / abs(np.linalg.det(m)) ** 0.25
    top = np.log(singular_values(m)[0])
    for j in range(5):
        assert abs(log_wedge_norm(m, j)) <= j * 3 * top + 1e-10


def test_wedge_norm_diagonal_products():
    # brute force over orderings: top-j of the pairwise products
    rng = np.random.default_rng(3)
    for n in range(1, 5):
        d1, d2 = rng.uniform(0.1, 3, n), rng.uniform(0.1, 3, n)
        prods = d1 * d2
        for j in range(n + 1):
            best = max(np.prod(c) for c in itertools.combinations(prods, j)) if j else 1.0
            assert wedge_norm(np.diag(d1) @ np.diag(d2), j) == pytest.approx(best, rel=1e-12)


def test_solve_examples(rng):
    b = rng.standard_normal(3) + 0j
    assert np.allclose(solve(np.eye(3), b), b)
    assert np.allclose(solve(np.diag([2, 1j]), np.array([2, 1j])), [1, 1])
    m = ginibre(rng, 6) + 3 * np.eye(6)
    rhs = ginibre(rng, 6)
    x = solve(m, rhs)
    assert np.abs(m @ x - rhs).max() <= 1e-10 * opnorm(m) * opnorm(x)


def test_solve_errors():
    with pytest.raises(Singular):
        solve(np.zeros((2, 2)), np.ones(2))
    with pytest.warns(IllConditioned):
        solve(np.diag([1.0, 1e-15]), np.ones(2))
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        solve(np.eye(2), np.ones(2))


def test_herm_eig_examples():
    w, _ = herm_eig(np.diag([1.0, -1.0]))
    assert np.allclose(w, [-1, 1])
    w, v = herm_eig(np.array([[0, 1], [1, 0]]))
    assert np.allclose(w, [-1, 1])
    assert abs(abs(np.vdot(v[:, 0], [1, -1])) / np.sqrt(2) - 1) < 1e-12
    chain = np.diag(np.ones(3), 1) + np.diag(np.ones(3), -1)
    w, _ = herm_eig(chain)
    assert np.allclose(w, -w[::-1])
    with pytest.raises(NotHermitian):
        herm_eig(np.array([[0, 1], [0, 0]]))


@given(seeds)
def test_herm_eig_properties(seed):
    rng = np.random.default_rng(seed)
    g = ginibre(rng, 5)
    m = g + g.conj().T
    w, v = herm_eig(m)
    assert np.all(np.diff(w) >= 0)
    assert np.abs(m @ v - v * w).max() <= 1e-9 * opnorm(m)
    assert np.abs(v.conj().T @ v - np.eye(5)).max() <= 1e-10
    assert abs(w.sum() - np.trace(m).real) <= 1e-9 * opnorm(m)


def test_dagger_inv_and_elementary_symmetric(rng):
    t = ginibre(rng, 3)
    assert np.allclose(dagger_inv(t) @ t.conj().T, np.eye(3))
    assert elementary_symmetric([1, 2, 3], 2) == 11
    assert elementary_symmetric([1, 2, 3], 0) == 1
