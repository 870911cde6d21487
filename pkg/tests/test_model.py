import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from chirallab import seeding
from chirallab.exceptions import ResampleLimit, SingularHopping, WindowMismatch
from chirallab.linalg import herm_eig, opnorm
from chirallab.model import (GUE, DiagonalComplexUniform, Fixed, Ginibre, ModelConfig, ShiftedGinibre,
                             assemble_hamiltonian, bloch_infimum, bloch_spectrum, dump_realization_csv,
                             hopping_blocks, hopping_chunk, periodic_gap_bound, periodic_hamiltonian,
                             realization_from_blocks, sample_hopping, sample_realization)
from conftest import ginibre

EULER_GAMMA_HALF = -0.28860783245076643  # -gamma/2: E log|z| for a unit complex Gaussian


def many_scalars(spec, count, seed=1):
    keys = seeding.derive_seeds(seed, 0, np.arange(count), 0)
    return spec.draw(keys, 0, 1)[:, 0, 0]


def test_seed_derivation_is_a_pure_function():
    assert seeding.derive_seed(1, 2, 3, 0) == seeding.derive_seed(1, 2, 3, 0)
    assert seeding.derive_seed(1, 2, 3, 0) != seeding.derive_seed(1, 2, 3, 1)
    keys = seeding.derive_seeds(7, 4, np.arange(-3, 5), 1)
    assert [int(k) for k in keys] == [seeding.derive_seed(7, 4, s, 1) for s in range(-3, 5)]
    grid = seeding.derive_seed_grid(7, [0, 4], np.arange(-3, 5), 1)
    assert np.array_equal(grid[:, 1], keys)


def test_complex_normals_reproducible_and_scaled():
    keys = seeding.derive_seeds(3, 0, np.arange(10), 0)
    a = seeding.complex_normals(keys, 0, 6)
    assert np.array_equal(a, seeding.complex_normals(keys, 0, 6))
    assert np.array_equal(a[:, 2:], seeding.complex_normals(keys, 2, 4))
    assert np.allclose(2.5 * a, seeding.complex_normals(keys, 0, 6, 2.5), rtol=1e-15)


def test_ginibre_second_moment():
    z = many_scalars(Ginibre(1.0), 100_000)
    m2 = np.abs(z) ** 2
    assert abs(m2.mean() - 1) <= 3 * m2.std() / np.sqrt(z.size)
    assert abs(z.mean()) <= 3 / np.sqrt(z.size) * 1.5


@pytest.mark.parametrize("sigma", [1.0, np.exp(-1.0)])
def test_ginibre_log_moment(sigma):
    v = np.log(np.abs(many_scalars(Ginibre(sigma), 1_000_000, seed=2))) - np.log(sigma)
    assert abs(v.mean() - EULER_GAMMA_HALF) <= 3 * v.std() / np.sqrt(v.size)


def test_diagonal_uniform_degenerate_interval():
    t, count = sample_hopping(DiagonalComplexUniform(1.0, 1.0), 2, 12345)
    assert count == 0
    assert np.allclose(np.abs(np.diag(t)), 1, atol=1e-15)
    assert t[0, 1] == 0 and t[1, 0] == 0


def test_distribution_validation():
    with pytest.raises(ValueError):
        Ginibre(0.0)
    with pytest.raises(ValueError):
        DiagonalComplexUniform(0.0, 1.0)
    with pytest.raises(ValueError):
        ShiftedGinibre(np.eye(2), -1.0)


def test_shifted_ginibre_mean():
    spec = ShiftedGinibre(np.array([[2.0]]), 0.5)
    z = many_scalars(spec, 20_000)
    assert abs(z.mean() - 2) <= 3 * 0.5 / np.sqrt(z.size) * 1.5


def test_resampling_gives_up_on_degenerate_law():
    with pytest.raises(ResampleLimit):
        sample_hopping(Fixed(np.zeros((2, 2))), 2, 0)


def test_resample_threshold_is_enforced():
    spec = Ginibre(1.0, resample_threshold=0.3)
    cfg = ModelConfig(2, spec, spec, seed=5)
    hop, resampled = hopping_blocks(cfg, 0, np.arange(400))
    assert np.linalg.svd(hop, compute_uv=False)[:, -1].min() >= 0.3
    assert resampled > 0


def test_realization_determinism_and_parity():
    cfg = ModelConfig(2, Ginibre(np.exp(-1)), Ginibre(np.exp(-2)), seed=11)
    r1 = sample_realization(cfg, (-5, 20), 3)
    r2 = sample_realization(cfg, (-5, 20), 3)
    assert np.array_equal(r1.hopping, r2.hopping)
    # any sub-window sees the same blocks: streams are keyed by absolute site
    sub = sample_realization(cfg, (4, 9), 3)
    assert np.array_equal(sub.hopping, r1.hopping[9:15])
    one = sample_realization(cfg, (1, 1), 3)
    key = seeding.derive_seed(cfg.seed, 3, 1, 1)
    assert np.array_equal(one.t(1), sample_hopping(cfg.alpha1, 2, key)[0])
    with pytest.raises(WindowMismatch):
        r1.t(21)


def test_parity_laws_differ_by_one_in_log_norm():
    cfg = ModelConfig(1, Ginibre(np.exp(-1)), Ginibre(np.exp(-2)), seed=4)
    hop, _ = hopping_blocks(cfg, 0, np.arange(20_000))
    logs = np.log(np.abs(hop[:, 0, 0]))
    even, odd = logs[0::2], logs[1::2]
    se = np.sqrt(even.var() / even.size + odd.var() / odd.size)
    assert abs(even.mean() - odd.mean() - 1) <= 3 * se


def test_chunk_matches_per_realization_blocks():
    cfg = ModelConfig(2, Ginibre(1.0), Ginibre(0.5), seed=9)
    blocks, counts = hopping_chunk(cfg, [2, 5], np.arange(3, 11))
    for col, idx in enumerate((2, 5)):
        single, _ = hopping_blocks(cfg, idx, np.arange(3, 11))
        assert np.array_equal(blocks[:, col], single)
    scattered, _ = hopping_chunk(cfg, [5], np.array([10, 3, 7]))
    assert np.array_equal(scattered[:, 0], blocks[[7, 0, 4], 1])


def test_disjoint_indices_are_uncorrelated():
    cfg = ModelConfig(1, Ginibre(1.0), Ginibre(1.0), seed=0)
    a, _ = hopping_blocks(cfg, 0, np.arange(1000))
    b, _ = hopping_blocks(cfg, 1, np.arange(1000))
    rho = np.corrcoef(np.abs(a[:, 0, 0]), np.abs(b[:, 0, 0]))[0, 1]
    assert abs(rho) < 0.05


def test_two_site_scalar_chain():
    h = assemble_hamiltonian(realization_from_blocks([5.0, 2 - 1j])).matrix
    assert np.allclose(h, [[0, 2 + 1j], [2 - 1j, 0]])
    assert np.allclose(np.linalg.eigvalsh(h), [-abs(2 - 1j), abs(2 - 1j)])


def test_three_site_free_chain():
    h = assemble_hamiltonian(realization_from_blocks(np.ones(3))).matrix
    assert np.allclose(h, [[0, 1, 0], [1, 0, 1], [0, 1, 0]])
    assert np.allclose(np.linalg.eigvalsh(h), [-np.sqrt(2), 0, np.sqrt(2)])


def test_assembly_window_errors():
    r = realization_from_blocks(np.ones(4))
    with pytest.raises(WindowMismatch):
        assemble_hamiltonian(r, (0, 3))


@given(st.integers(0, 2**32 - 1), st.integers(1, 3), st.integers(-4, 4), st.integers(1, 12))
def test_chiral_structure(seed, n, start, length):
    cfg = ModelConfig(n, Ginibre(1.0), Ginibre(0.6), seed=seed)
    ham = assemble_hamiltonian(sample_realization(cfg, (start, start + length - 1)))
    h = ham.matrix
    assert np.array_equal(h, h.conj().T)
    pi = ham.chirality()
    assert np.array_equal(pi[:, None] * h * pi[None, :], -h)  # {H, Pi} = 0 exactly
    w, _ = herm_eig(h)
    assert np.abs(w + w[::-1]).max() <= 1e-9 * opnorm(h)
    # same-parity sites never couple; the band is three blocks wide
    for x in ham.sites:
        for y in ham.sites:
            if (x - y) % 2 == 0 or abs(x - y) > 1:
                assert not np.any(ham.block(x, y))


def test_wegner_onsite_blocks_are_hermitian():
    cfg = ModelConfig(3, Ginibre(1.0), Ginibre(1.0), onsite=GUE(0.5), seed=2)
    r = sample_realization(cfg, (0, 5))
    assert np.abs(r.onsite - np.conj(np.swapaxes(r.onsite, -1, -2))).max() <= 1e-12
    h = assemble_hamiltonian(r)
    assert not h.is_chiral
    assert np.allclose(h.block(2, 2), r.v(2))


def test_realization_csv(tmp_path):
    r = realization_from_blocks([1 + 2j, 3.0])
    dump_realization_csv(r, tmp_path / "r.csv")
    lines = (tmp_path / "r.csv").read_text().splitlines()
    assert lines[0] == "n,row,col,re,im"
    assert lines[1] == "1,0,0,1,2"


def test_bloch_closed_forms():
    band = bloch_spectrum([[1.0]], [[1.0]], 64)
    assert np.allclose(band.singular_values[:, 0], 2 * np.abs(np.cos(band.k / 2)))
    assert bloch_spectrum([[1.0]], [[1.0]], 1001).gap < bloch_spectrum([[1.0]], [[1.0]], 11).gap
    assert bloch_infimum([[1.0]], [[2.0]]) == pytest.approx(1.0, abs=1e-12)
    assert bloch_infimum([[1.0]], [[1.0]], 10) < 1e-9


def test_bloch_grid_matches_periodic_chain(rng):
    a, b = ginibre(rng, 2), ginibre(rng, 2)
    grid = bloch_spectrum(a, b, 1024).gap
    moduli = np.abs(np.linalg.eigvalsh(periodic_hamiltonian(a, b, 512)))
    assert grid <= moduli.min() + 1e-6
    # and the 512-cell spectrum is exactly the 512-point Bloch grid
    sv = bloch_spectrum(a, b, 512).singular_values.ravel()
    assert np.allclose(np.sort(np.concatenate([sv, -sv])), np.linalg.eigvalsh(periodic_hamiltonian(a, b, 512)),
                       atol=1e-10)


def test_gap_bound_examples():
    assert periodic_gap_bound(np.eye(2), np.eye(2)) == 0
    assert periodic_gap_bound([[1.0]], [[2.0]]) == pytest.approx(1.0)
    assert bloch_infimum([[1.0]], [[2.0]]) ** 2 <= periodic_gap_bound([[1.0]], [[2.0]]) + 1e-8
    with pytest.raises(SingularHopping):
        periodic_gap_bound(np.zeros((1, 1)), np.eye(1))


def test_gap_bound_scalar_chains_hold():
    rng = np.random.default_rng(0)
    for _ in range(200):
        a, b = ginibre(rng, 1), ginibre(rng, 1)
        assert bloch_infimum(a, b) ** 2 <= periodic_gap_bound(a, b) + 1e-8


@pytest.mark.xfail(strict=True, reason="the gap bound fails for a fraction of random N=2 pairs")
def test_gap_bound_n2_random_pairs():
    rng = np.random.default_rng(0)
    for _ in range(1000):
        a, b = ginibre(rng, 2), ginibre(rng, 2)
        assert bloch_infimum(a, b) ** 2 <= periodic_gap_bound(a, b) + 1e-8
