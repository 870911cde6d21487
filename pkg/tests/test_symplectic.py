import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from chirallab.exceptions import (ChartAsymmetric, ChartDegenerate, DBlockSingular, NotSymplectic,
                                  OddDimension, SingularHopping)
from chirallab.symplectic import (DRSChart, chart_from_matrix, is_symplectic, j_matrix,
                                  matrix_from_chart, product_chart_three, product_chart_two,
                                  spectral_symmetry_check)
from chirallab.transfer import transfer_blocks
from conftest import ginibre

seeds = st.integers(0, 2**32 - 1)
sizes = st.integers(1, 3)


def herm(rng, n):
    g = ginibre(rng, n)
    return 0.5 * (g + g.conj().T)


def random_chart(rng, n):
    return DRSChart(ginibre(rng, n) + 2 * np.eye(n), herm(rng, n), herm(rng, n))


def random_member(rng, n):
    return matrix_from_chart(random_chart(rng, n))


def chart_dev(a, b):
    return max(np.abs(a.d - b.d).max(), np.abs(a.r - b.r).max(), np.abs(a.s - b.s).max())


def test_j_matrix_exact():
    j = j_matrix(3)
    assert np.array_equal(j @ j, -np.eye(6))
    assert np.array_equal(j.conj().T, -j)


def test_membership_examples(rng):
    assert is_symplectic(j_matrix(2)) == (True, 0.0)
    assert is_symplectic(np.eye(4)).member
    a = transfer_blocks(ginibre(rng, 2), 0.7)
    assert is_symplectic(a, 1e-10).member
    assert not is_symplectic(np.diag([2.0, 1.0])).member
    with pytest.raises(OddDimension):
        is_symplectic(np.eye(3))


def test_matrix_from_chart_examples():
    assert np.allclose(matrix_from_chart(DRSChart(np.eye(2), np.zeros((2, 2)), np.zeros((2, 2)))), np.eye(4))
    m = matrix_from_chart(DRSChart([[1]], [[2]], [[0]]))
    assert np.allclose(m, [[1, 2], [0, 1]])
    with pytest.raises(ChartDegenerate):
        matrix_from_chart(DRSChart([[0]], [[0]], [[0]]))


def test_chart_round_trip(rng):
    worst = 0.0
    for _ in range(100):
        c = random_chart(rng, 2)
        m = matrix_from_chart(c)
        assert is_symplectic(m, 1e-10).member
        assert np.array_equal(m[2:, 2:], c.d)
        worst = max(worst, chart_dev(chart_from_matrix(m), c))
    assert worst <= 1e-10


def test_chart_from_identity_and_errors(rng):
    c = chart_from_matrix(np.eye(4))
    assert np.allclose(c.d, np.eye(2)) and np.allclose(c.r, 0) and np.allclose(c.s, 0)
    with pytest.raises(NotSymplectic):
        chart_from_matrix(np.diag([2.0, 1.0]))
    with pytest.raises(DBlockSingular):
        chart_from_matrix(j_matrix(1))


def test_chart_asymmetry_is_reported_and_optionally_rejected(rng):
    m = random_member(rng, 2)
    m[:2, 2:] += 1e-11 * ginibre(rng, 2)  # still a member at 1e-8, but R picks up a skew part
    c = chart_from_matrix(m)
    assert 0 < c.asymmetry < 1e-8
    with pytest.raises(ChartAsymmetric):
        chart_from_matrix(m, max_asymmetry=1e-14)


def test_two_factor_chart_examples():
    c = product_chart_two(np.eye(2), np.eye(2), 1.0)
    assert np.allclose(c.d, -np.eye(2)) and np.allclose(c.r, np.eye(2)) and np.allclose(c.s, -np.eye(2))
    c = product_chart_two([[2.0]], [[1.0]], 1.0)
    assert np.allclose([c.d[0, 0], c.r[0, 0], c.s[0, 0]], [-0.5, 1, -1])
    with pytest.raises(SingularHopping):
        product_chart_two(np.zeros((1, 1)), np.eye(1), 1.0)


def test_three_factor_chart_examples():
    c = product_chart_three(np.eye(2), DRSChart(np.eye(2), np.eye(2), np.zeros((2, 2))), 1.0)
    assert np.allclose(c.d, np.eye(2)) and np.allclose(c.r, 0) and np.allclose(c.s, np.eye(2))
    c = product_chart_three([[1.0]], DRSChart([[-1.0]], [[2.0]], [[-2.0]]), 2.0)
    assert np.allclose([c.d[0, 0], c.r[0, 0], c.s[0, 0]], [-2, 1.5, -1.5])


@given(seeds, sizes, st.floats(0.2, 3.0), st.booleans())
def test_product_charts_match_explicit_products(seed, n, lam, negative):
    lam = -lam if negative else lam
    rng = np.random.default_rng(seed)
    t1, t2, t3 = (ginibre(rng, n) + np.eye(n) for _ in range(3))
    a1, a2, a3 = (transfer_blocks(t, lam) for t in (t1, t2, t3))
    two = product_chart_two(t1, t2, lam)
    assert chart_dev(two, chart_from_matrix(a1 @ a2)) <= 1e-10 * max(1, np.abs(a1 @ a2).max()) ** 2
    three = product_chart_three(t3, two, lam)
    m = a3 @ a1 @ a2
    assert chart_dev(three, chart_from_matrix(m)) <= 1e-10 * max(1, np.abs(m).max()) ** 2


@given(seeds, sizes)
def test_group_closure_and_norm_symmetry(seed, n):
    rng = np.random.default_rng(seed)
    m1, m2 = random_member(rng, n), random_member(rng, n)
    assert is_symplectic(m1 @ m2, 1e-9).member
    assert is_symplectic(np.linalg.inv(m1), 1e-9).member
    assert np.linalg.norm(m1, 2) == pytest.approx(np.linalg.norm(np.linalg.inv(m1), 2), rel=1e-8)


def test_singular_values_pair_on_group(rng):
    for n in (1, 2, 3):
        sv = np.linalg.svd(random_member(rng, n), compute_uv=False)
        assert np.abs(sv * sv[::-1] - 1).max() <= 1e-8


def test_spectral_symmetry_examples(rng):
    rep = spectral_symmetry_check(j_matrix(2))
    assert rep.defect < 1e-14 and np.allclose(rep.eigenvalue_moduli, 1)
    rep = spectral_symmetry_check(matrix_from_chart(DRSChart([[2.0]], [[0]], [[0]])))
    assert np.allclose(rep.singular_values, [2, 0.5])
    m = np.eye(4)
    for _ in range(10):
        m = transfer_blocks(ginibre(rng, 2), 1.0) @ m
    assert spectral_symmetry_check(m).defect <= 1e-7
    with pytest.raises(OddDimension):
        spectral_symmetry_check(np.eye(3))
