"""Finite-volume Green's functions and the decay diagnostics built on them.

G_{[a,b]}(x, y; z) is the N x N block of (H_{[a,b]} - z)^{-1}.  Block norms
are trace norms unless stated otherwise.  Tolerances are relative to
``scale = 1 + ||H|| + |z|``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
import scipy.linalg

from . import seeding
from .exceptions import (EigenfailureAtFermi, NearSingular, ParityError, RankDeficient,
                         TooFewSamples, WindowMismatch)
from .fitting import DecayFit, fit_exponential
from .linalg import dagger_inv, elementary_symmetric, herm_eig, opnorm
from .model import FiniteHamiltonian, ModelConfig, Realization, assemble_hamiltonian, sample_realization
from .parallel import Threads, map_indices
from .records import write_csv, write_json
from .transfer import explicit_product

NEAR_SINGULAR = 1e-10
MIN_SAMPLES = 8
FIT_MIN_DISTANCE = 10


def scale_of(h: FiniteHamiltonian, z: complex) -> float:
    return 1.0 + opnorm(h.matrix) + abs(z)


def trace_norm(blocks) -> np.ndarray:
    """Trace norm of one block or a stack of blocks."""
    return np.linalg.svd(np.asarray(blocks), compute_uv=False).sum(axis=-1)


def operator_norm(blocks) -> np.ndarray:
    return np.linalg.svd(np.asarray(blocks), compute_uv=False)[..., 0]


# --------------------------------------------------------------------------
# direct solves
# --------------------------------------------------------------------------

def _banded(m: np.ndarray, bw: int) -> np.ndarray:
    size = m.shape[0]
    ab = np.zeros((2 * bw + 1, size), dtype=m.dtype)
    for d in range(-bw, bw + 1):
        diag = np.diagonal(m, d)
        if d >= 0:
            ab[bw - d, d:] = diag
        else:
            ab[bw - d, :size + d] = diag
    return ab


def _check_spectrum(h: FiniteHamiltonian, z: complex, scale: float) -> None:
    if z.imag != 0:
        return
    evals, _ = herm_eig(h.matrix)
    gap = float(np.min(np.abs(evals - z.real))) if evals.size else np.inf
    if gap <= NEAR_SINGULAR * scale:
        raise NearSingular(f"z = {z.real:.6g} lies within {gap:.3e} of the spectrum")


def resolvent_columns(h: FiniteHamiltonian, z: complex, ys: Sequence[int], check: bool = True) -> np.ndarray:
    """Block columns of (H - z)^-1 at sites ``ys``; shape (L*N, len(ys)*N).

    Uses a banded LU solve (bandwidth 2N - 1 of the block-tridiagonal H).
    """
    z = complex(z)
    n = h.n_internal
    a, b = h.window
    if check:
        _check_spectrum(h, z, scale_of(h, z))
    size = h.matrix.shape[0]
    rhs = np.zeros((size, len(ys) * n), dtype=np.complex128)
    for c, y in enumerate(ys):
        if not a <= y <= b:
            raise WindowMismatch(f"site {y} outside {h.window}")
        rhs[(y - a) * n:(y - a + 1) * n, c * n:(c + 1) * n] = np.eye(n)
    m = h.matrix - z * np.eye(size)
    bw = 2 * n - 1
    if size <= 4 * (bw + 1):
        return scipy.linalg.solve(m, rhs)
    return scipy.linalg.solve_banded((bw, bw), _banded(m, bw), rhs)


@dataclass(frozen=True, eq=False)
class GreensTable:
    window: tuple[int, int]
    z: complex
    entries: dict
    scale: float
    realization: Optional[Realization] = field(default=None, repr=False)

    def __getitem__(self, pair) -> np.ndarray:
        return self.entries[tuple(pair)]

    def trace_norms(self) -> dict:
        return {k: float(trace_norm(v)) for k, v in self.entries.items()}

    def operator_norms(self) -> dict:
        return {k: float(operator_norm(v)) for k, v in self.entries.items()}


def greens_finite(h: FiniteHamiltonian, z: complex, pairs: Sequence[tuple[int, int]]) -> GreensTable:
    """Blocks G_{[a,b]}(x, y; z) for the requested (x, y) pairs."""
    z = complex(z)
    pairs = [(int(x), int(y)) for x, y in pairs]
    a, b = h.window
    for x, y in pairs:
        if not (a <= x <= b and a <= y <= b):
            raise WindowMismatch(f"pair {(x, y)} outside {h.window}")
    ys = sorted({y for _, y in pairs})
    cols = resolvent_columns(h, z, ys)
    n = h.n_internal
    where = {y: c for c, y in enumerate(ys)}
    entries = {}
    for x, y in pairs:
        c = where[y]
        entries[(x, y)] = cols[(x - a) * n:(x - a + 1) * n, c * n:(c + 1) * n].copy()
    return GreensTable(h.window, z, entries, scale_of(h, z), h.realization)


def dump_greens_csv(table: GreensTable, path, meta=None):
    """greens_dump.csv rows (x, y, row, col, re, im)."""
    rows = []
    for (x, y), block in table.entries.items():
        for i in range(block.shape[0]):
            for j in range(block.shape[1]):
                rows.append((x, y, i, j, float(block[i, j].real), float(block[i, j].imag)))
    return write_csv(path, ("x", "y", "row", "col", "re", "im"), rows, meta)


# --------------------------------------------------------------------------
# zero energy
# --------------------------------------------------------------------------

def greens_zero_closed_form(r: Realization, x: int, y: int) -> np.ndarray:
    """G_{[a,b]}(x, y; 0) from the hopping blocks alone.

    The window must start on an odd and end on an even site (the even-length
    windows [1, 2n] and their even translates).  For x = 2k > y = 2l+1

        G(2k, 2l+1; 0) = (-T_{2k}° T_{2k-1}) ... (-T_{2l+4}° T_{2l+3}) T_{2l+2}°,

    same-parity blocks vanish, and the remaining mixed-parity blocks are
    rejected (they follow from G(y, x; 0) = G(x, y; 0)^*).
    """
    a, b = r.window
    if a % 2 != 1 or b % 2 != 0:
        raise WindowMismatch(f"closed form needs a window [odd, even], got {r.window}")
    if not (a <= x <= b and a <= y <= b):
        raise WindowMismatch(f"pair {(x, y)} outside {r.window}")
    n = r.n_internal
    if (x - y) % 2 == 0:
        return np.zeros((n, n), dtype=np.complex128)
    if x % 2 != 0 or x < y:
        raise ParityError(f"closed form covers x even > y odd, got {(x, y)}")
    g = dagger_inv(r.t(y + 1))
    for site in range(y + 3, x + 1, 2):
        g = -dagger_inv(r.t(site)) @ r.t(site - 1) @ g
    return g


def greens_zero_closed_form_matrix(r: Realization) -> np.ndarray:
    """All of (H_{[a,b]})^-1 from the closed form, as a dense matrix.

    Column y (odd) is built upwards, G(x + 2, y) = -T_{x+2}° T_{x+1} G(x, y);
    the even columns follow from G(y, x) = G(x, y)^* and everything else is
    an exact zero.
    """
    a, b = r.window
    if a % 2 != 1 or b % 2 != 0:
        raise WindowMismatch(f"closed form needs a window [odd, even], got {r.window}")
    n = r.n_internal
    out = np.zeros(((b - a + 1) * n,) * 2, dtype=np.complex128)
    steps = {x: -dagger_inv(r.t(x)) @ r.t(x - 1) for x in range(a + 3, b + 1, 2)}
    for y in range(a, b, 2):
        g = dagger_inv(r.t(y + 1))
        for x in range(y + 1, b + 1, 2):
            if x > y + 1:
                g = steps[x] @ g
            i, j = (x - a) * n, (y - a) * n
            out[i:i + n, j:j + n] = g
            out[j:j + n, i:i + n] = g.conj().T
    return out


def kernel_dim(h: FiniteHamiltonian, tol_rel: float = 1e-8) -> int:
    """Number of singular values of H below ``tol_rel`` times the largest."""
    sv = np.linalg.svd(h.matrix, compute_uv=False)
    if sv.size == 0 or sv[0] == 0:
        return int(sv.size)
    return int(np.sum(sv < tol_rel * sv[0]))


# --------------------------------------------------------------------------
# fractional moments
# --------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class FMEstimate:
    s: float
    lam: float
    eta: float
    distances: np.ndarray
    sample_means: np.ndarray
    std_errors: np.ndarray
    counts: np.ndarray
    fit: DecayFit
    band: float
    rejected: int = 0
    realizations: int = 0
    lambda_s_means: Optional[np.ndarray] = None

    @property
    def mu(self) -> float:
        return self.fit.rate

    def fit_record(self) -> dict:
        return {"mu": self.mu, "intercept": self.fit.intercept, "r2": self.fit.r_squared,
                "band": self.band, "fit_window": list(self.fit.window)}


def default_fit_window(max_distance: int) -> tuple[float, float]:
    """Distances from 10 up to 90% of the largest distance."""
    return (float(FIT_MIN_DISTANCE), float(np.floor(0.9 * max_distance)))


def _moment_samples(config: ModelConfig, z: complex, window: tuple[int, int], pairs, s: float,
                    indices, strict_real: bool):
    """Trace-norm s-moments per realization; rows for rejected realizations are None."""
    out = []
    for idx in indices:
        r = sample_realization(config, window, idx)
        h = assemble_hamiltonian(r)
        try:
            g = greens_finite(h, z, pairs)
        except NearSingular:
            if not strict_real:
                raise
            out.append(None)
            continue
        out.append(np.array([trace_norm(g[p]) for p in pairs]) ** s)
    return out


def _collect_moments(config, z, window, pairs, s, n_realizations, threads, strict_real):
    """Draw realizations 0, 1, 2, ... until ``n_realizations`` are accepted."""
    accepted, rejected, next_index = [], 0, 0
    while len(accepted) < n_realizations:
        need = n_realizations - len(accepted)
        batch = list(range(next_index, next_index + need))
        next_index += need
        parts = map_indices(lambda idx: _moment_samples(config, z, window, pairs, s, idx, strict_real),
                            batch, threads)
        for row in (r for part in parts for r in part):
            if row is None:
                rejected += 1
            else:
                accepted.append(row)
        if rejected > 10 * n_realizations + 100:
            raise NearSingular("too many realizations with z in the spectrum")
    return np.array(accepted), rejected


def _bootstrap_rates(samples: np.ndarray, distances: np.ndarray, window, resamples: int, seed: int) -> np.ndarray:
    rng = np.random.default_rng(seeding.derive_seed(seed, 0, 0, seeding.TAG_BOOTSTRAP))
    n = samples.shape[0]
    rates = np.empty(resamples)
    for b in range(resamples):
        means = samples[rng.integers(0, n, n)].mean(axis=0)
        rates[b] = fit_exponential(distances, means, window).rate
    return rates


def fm_estimate(config: ModelConfig, lam: float, eta: float = 0.0, s: float = 0.5, window_len: int = 64,
                n_realizations: int = 200, pairs: Optional[Sequence[tuple[int, int]]] = None,
                fit_window: Optional[tuple[float, float]] = None, bootstrap: int = 200,
                threads: Threads = 1) -> FMEstimate:
    """Sample means of ||G(x, y; lam + i eta)||^s against |x - y| with an exponential fit.

    Windows are [1, window_len]; the default pairs are the first column,
    (1 + d, 1) for d = 0 .. window_len - 1.  At eta = 0 realizations whose
    spectrum comes within the near-singular tolerance of lam are rejected,
    counted and replaced by the next realization index.  The band on mu is
    the standard deviation over ``bootstrap`` resamples of realizations.
    """
    if not 0 < s < 1:
        raise ValueError("s must lie in (0, 1)")
    if eta < 0:
        raise ValueError("eta must be >= 0")
    window = (1, int(window_len))
    if pairs is None:
        pairs = [(1 + d, 1) for d in range(window_len)]
    pairs = [(int(x), int(y)) for x, y in pairs]
    z = complex(lam, eta)
    samples, rejected = _collect_moments(config, z, window, pairs, s, n_realizations, threads, eta == 0)
    dist_of_pair = np.array([abs(x - y) for x, y in pairs])
    distances = np.unique(dist_of_pair)
    per_dist = np.stack([samples[:, dist_of_pair == d].mean(axis=1) for d in distances], axis=1)
    counts = np.array([samples.shape[0] * int(np.sum(dist_of_pair == d)) for d in distances])
    if np.any(counts < MIN_SAMPLES):
        raise TooFewSamples(f"fewer than {MIN_SAMPLES} samples at some distance")
    means = per_dist.mean(axis=0)
    se = per_dist.std(axis=0, ddof=1) / np.sqrt(per_dist.shape[0])
    window_fit = default_fit_window(int(distances.max())) if fit_window is None else fit_window
    fit = fit_exponential(distances, means, window_fit, label="fractional moment")
    band = float(np.std(_bootstrap_rates(per_dist, distances, window_fit, bootstrap, config.seed), ddof=1)) \
        if bootstrap > 1 else float("nan")
    return FMEstimate(s, float(lam), float(eta), distances, means, se, counts, fit, band, rejected,
                      samples.shape[0], abs(lam) ** s * means)


def write_fm(fm: FMEstimate, out_dir, meta=None):
    """fm_decay.csv and fit.json."""
    from pathlib import Path

    out_dir = Path(out_dir)
    rows = [(int(d), float(m), float(e), int(c), float(lm))
            for d, m, e, c, lm in zip(fm.distances, fm.sample_means, fm.std_errors, fm.counts, fm.lambda_s_means)]
    write_csv(out_dir / "fm_decay.csv", ("distance", "mean", "stderr", "n", "lambda_s_mean"), rows, meta)
    write_json(out_dir / "fit.json", fm.fit_record(), meta)


def typical_decay(config: ModelConfig, lam: float, n: int, realizations: int = 200,
                  threads: Threads = 1) -> tuple[float, np.ndarray]:
    """Median over realizations of -log ||G_{[1,n]}(1, n; lam)|| / n (and the samples)."""
    def work(indices):
        vals = []
        for idx in indices:
            h = assemble_hamiltonian(sample_realization(config, (1, n), idx))
            g = greens_finite(h, complex(lam), [(1, n)])[(1, n)]
            vals.append(-np.log(trace_norm(g)) / n)
        return vals

    vals = np.array([v for part in map_indices(work, list(range(realizations)), threads) for v in part])
    return float(np.median(vals)), vals


# --------------------------------------------------------------------------
# scans
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class AprioriRow:
    z: complex
    one_step_mean: float
    one_step_stderr: float
    diagonal_mean: float  # |z| * E ||G(x, x)||^s
    diagonal_stderr: float
    flagged: bool = False


def apriori_scan(config: ModelConfig, z_list: Sequence[complex], s: float = 0.5, n_realizations: int = 500,
                 window_len: int = 64, threads: Threads = 1) -> list[AprioriRow]:
    """E ||G(x, x-1; z)||^s and |z| E ||G(x, x; z)||^s at the middle site x.

    Rows whose mean exceeds 10 times the median over z are flagged.
    """
    if not 0 < s < 1:
        raise ValueError("s must lie in (0, 1)")
    if window_len % 2:
        raise ValueError("window_len must be even")
    window = (1, int(window_len))
    x = window_len // 2 + 1
    pairs = [(x, x - 1), (x, x)]
    raw = []
    for z in z_list:
        z = complex(z)
        samples, _ = _collect_moments(config, z, window, pairs, s, n_realizations, threads, z.imag == 0)
        n = samples.shape[0]
        m = samples.mean(axis=0)
        e = samples.std(axis=0, ddof=1) / np.sqrt(n)
        raw.append((z, m[0], e[0], abs(z) * m[1], abs(z) * e[1]))
    med_one = np.median([r[1] for r in raw])
    med_diag = np.median([r[3] for r in raw])
    return [AprioriRow(z, m0, e0, m1, e1, bool(m0 > 10 * med_one or m1 > 10 * med_diag))
            for z, m0, e0, m1, e1 in raw]


@dataclass(frozen=True, eq=False)
class CombesThomasScan:
    energy: float
    etas: np.ndarray
    estimates: list
    monotone: bool
    ratios: np.ndarray  # mu(eta) / eta

    @property
    def fits(self) -> list[DecayFit]:
        return [e.fit for e in self.estimates]

    @property
    def mus(self) -> np.ndarray:
        return np.array([e.mu for e in self.estimates])

    @property
    def bands(self) -> np.ndarray:
        return np.array([e.band for e in self.estimates])


def combes_thomas_scan(config: ModelConfig, E: float, eta_list: Sequence[float], s: float = 0.5,
                       window_len: int = 64, n_realizations: int = 100, threads: Threads = 1,
                       **fm_kwargs) -> CombesThomasScan:
    """Fitted decay rate of E ||G(x, y; E + i eta)||^s for each eta (sorted ascending).

    ``monotone`` holds when mu never drops by more than the sum of the two
    neighbouring bootstrap bands.
    """
    etas = np.sort(np.asarray(eta_list, dtype=float))
    if etas.size == 0 or np.any(etas <= 0):
        raise ValueError("eta_list must be non-empty and positive")
    ests = [fm_estimate(config, E, eta, s, window_len, n_realizations, threads=threads, **fm_kwargs)
            for eta in etas]
    mus = np.array([e.mu for e in ests])
    bands = np.array([e.band for e in ests])
    monotone = bool(np.all(mus[1:] >= mus[:-1] - (bands[1:] + bands[:-1])))
    return CombesThomasScan(float(E), etas, ests, monotone, mus / etas)


@dataclass(frozen=True, eq=False)
class FermiDecay:
    fit: DecayFit
    row: int
    distances: np.ndarray
    norms: np.ndarray
    idempotency_defect: float
    chiral_defect: Optional[float]
    kernel_dim: int

    @property
    def band(self) -> float:
        return self.fit.slope_stderr


def fermi_projection_decay(h: FiniteHamiltonian, fermi_energy: float = 0.0, row: Optional[int] = None,
                           floor: float = 1e-12) -> FermiDecay:
    """Decay of the blocks of P = chi_(-inf, E_F)(H) along one row.

    The fit is log ||P(x, y)|| against |x - y| over y != x with the value
    above ``floor`` times the largest block norm (the eigensolver's accuracy
    floor).  For the chiral model at E_F = 0 the blocks at even distance
    vanish identically and are left out.
    """
    scale = scale_of(h, fermi_energy)
    evals, evecs = herm_eig(h.matrix)
    if np.min(np.abs(evals - fermi_energy)) <= NEAR_SINGULAR * scale:
        raise EigenfailureAtFermi("an eigenvalue sits at the Fermi energy")
    occ = evecs[:, evals < fermi_energy]
    p = occ @ occ.conj().T
    a, b = h.window
    n = h.n_internal
    x = (a + b) // 2 if row is None else int(row)
    ys = [y for y in range(a, b + 1) if y != x]
    chiral_zero = h.is_chiral and fermi_energy == 0
    if chiral_zero:
        ys = [y for y in ys if (x - y) % 2]
    blocks = np.stack([p[(x - a) * n:(x - a + 1) * n, (y - a) * n:(y - a + 1) * n] for y in ys])
    norms = trace_norm(blocks)
    dist = np.abs(np.array(ys) - x).astype(float)
    keep = norms > floor * norms.max()
    fit = fit_exponential(dist[keep], norms[keep], (float(dist[keep].min()), float(dist[keep].max())),
                          label="Fermi projection")
    idem = float(np.abs(p @ p - p).max())
    chiral = None
    kdim = kernel_dim(h) if h.is_chiral else 0
    if h.is_chiral and fermi_energy == 0:
        # no eigenvalue at 0 got past the check above, so Pi P Pi = 1 - P exactly
        pi = h.chirality()
        chiral = float(np.abs(pi[:, None] * p * pi[None, :] - (np.eye(p.shape[0]) - p)).max())
    return FermiDecay(fit, x, dist, norms, idem, chiral, kdim)


@dataclass(frozen=True, eq=False)
class ConvergenceScan:
    z: complex
    window_lens: np.ndarray
    values: np.ndarray  # G_{[-n+1, n]}(0, 0; z), one block per window
    differences: np.ndarray  # trace norm of consecutive differences

    @property
    def cauchy_monotone(self) -> bool:
        return bool(np.all(np.diff(self.differences) <= 1e-12))


def resolvent_convergence_scan(config: ModelConfig, z: complex, window_lens: Sequence[int],
                               realization_index: int = 0) -> ConvergenceScan:
    """G_{[-n+1, n]}(0, 0; z) on one realization for windows of length 2n."""
    z = complex(z)
    if z.imag == 0:
        raise ValueError("the convergence scan needs Im z != 0")
    lens = [int(w) for w in window_lens]
    if any(w < 2 or w % 2 for w in lens):
        raise ValueError("window lengths must be even and >= 2")
    half = max(lens) // 2
    r = sample_realization(config, (-half + 1, half), realization_index)
    vals = []
    for w in lens:
        h = assemble_hamiltonian(r, (-w // 2 + 1, w // 2))
        vals.append(greens_finite(h, z, [(0, 0)])[(0, 0)])
    vals = np.array(vals)
    diffs = trace_norm(vals[1:] - vals[:-1]) if len(vals) > 1 else np.zeros(0)
    return ConvergenceScan(z, np.array(lens), vals, np.asarray(diffs, dtype=float))


# --------------------------------------------------------------------------
# transfer-matrix formula for the Green's function
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class WedgeReport:
    lhs: float  # ||G_{m-1,k}||^2 (operator norm of |G|^2)
    rhs: float  # ratio * || |calG_{k-1,k}|^2 ||
    ratio: float  # tr|wedge^(l-1) BP|^2 / tr|wedge^l BP|^2
    margin: float  # smallest eigenvalue of ratio |calG|^2 - |G|^2, relative to rhs
    holds: bool
    first_n_projector: bool  # P coincides with the first-N projector
    ratio_first_n: float
    holds_first_n: bool  # same inequality with P = first-N projector


def _wedge_ratio(bp: np.ndarray, l: int) -> float:
    sv2 = np.linalg.svd(bp, compute_uv=False)[:l] ** 2
    if sv2[-1] <= 1e-300 or sv2[-1] < 1e-28 * sv2[0]:
        raise RankDeficient("B P lost rank")
    return elementary_symmetric(sv2, l - 1) / elementary_symmetric(sv2, l)


def wedge_ratio_bound_check(r: Realization, z: complex, k: int, m: int, slack: float = 1e-9) -> WedgeReport:
    """Check |G_{m-1,k}|^2 <= ratio |calG_{k-1,k}|^2 on the realization window.

    calG_{n,k} = (T_{n+1}^* G_{n+1,k}, G_{n,k}) and B = A_{k-1} ... A_m.
    P is the orthogonal projector onto the range of calG_{m-1,k}; with
    m - 1 = a - 1 (left edge, psi_{a-1} = 0) this is the projector onto the
    first N coordinates.  Both sides are compared as N x N matrices.
    """
    a, b = r.window
    if not (a <= m <= k <= b):
        raise WindowMismatch(f"need a <= m <= k <= b, got m={m}, k={k}, window {r.window}")
    z = complex(z)
    n = r.n_internal
    h = assemble_hamiltonian(r)
    col = resolvent_columns(h, z, [k], check=False)

    def g(site):
        if site < a or site > b:
            return np.zeros((n, n), dtype=np.complex128)
        return col[(site - a) * n:(site - a + 1) * n]

    def calg(site):
        upper = r.t(site + 1).conj().T @ g(site + 1) if site + 1 <= b else np.zeros((n, n))
        return np.vstack([upper, g(site)])

    bmat = explicit_product(r, z, k - 1, m)
    start = calg(m - 1)
    q, rr = np.linalg.qr(start)
    if np.min(np.abs(np.diag(rr))) < 1e-14 * max(np.abs(rr).max(), 1e-300):
        raise RankDeficient("calG_{m-1,k} is rank deficient")
    proj = q @ q.conj().T
    ratio = _wedge_ratio(bmat @ proj, n)
    first = np.zeros((2 * n, 2 * n))
    first[:n, :n] = np.eye(n)
    ratio_first = _wedge_ratio(bmat @ first, n)
    lhs_m = g(m - 1).conj().T @ g(m - 1)
    end = calg(k - 1)
    rhs_m = ratio * (end.conj().T @ end)
    diff = rhs_m - lhs_m
    rhs = float(np.linalg.norm(rhs_m, 2))
    margin = float(np.linalg.eigvalsh(0.5 * (diff + diff.conj().T)).min()) / max(rhs, 1e-300)
    diff_first = ratio_first * (end.conj().T @ end) - lhs_m
    margin_first = float(np.linalg.eigvalsh(0.5 * (diff_first + diff_first.conj().T)).min())
    holds_first = margin_first >= -slack * max(float(np.linalg.norm(ratio_first * (end.conj().T @ end), 2)), 1e-300)
    return WedgeReport(float(np.linalg.norm(lhs_m, 2)), rhs, float(ratio), margin, margin >= -slack,
                       m == a, float(ratio_first), holds_first)
