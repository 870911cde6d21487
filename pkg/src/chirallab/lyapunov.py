"""Lyapunov spectra of the transfer-matrix cocycle.

Exponents come from running QR deflation: the frame is pushed through the
transfer matrices and the logs of the R diagonals are accumulated.  The
initial ``burn_in`` steps are discarded so that the O(1/n) transient of the
frame alignment does not bias the rate.

At zero energy the chiral model splits into two sectors (odd and even
sites) propagated by the N x N maps ``-T_{2x+1}° T_{2x}`` and
``-T_{2x+2}° T_{2x+1}``.  ``xis_plus`` refers to the odd-site sector.
One sector step covers two sites, so the full per-site spectrum at z = 0 is
{xi / 2}.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy.special import digamma

from . import _kernels
from .exceptions import InsufficientSteps, NotChiral, RankDeficient
from .model import ModelConfig, hopping_chunk, onsite_chunk
from .parallel import Threads, map_indices
from .records import write_csv, write_json
from .transfer import ProductAccumulator, transfer_blocks, zero_energy_sector_step

N_BATCHES = 32
MIN_STEPS = 1000
_CHUNK_ELEMENTS = 1 << 20  # complex entries per generated chunk of blocks


# --------------------------------------------------------------------------
# result types
# --------------------------------------------------------------------------

def _pair_defect(values: np.ndarray) -> np.ndarray:
    return np.abs(values + values[::-1])


@dataclass(frozen=True, eq=False)
class LyapunovEstimate:
    z: complex
    gammas: np.ndarray
    std_errors: np.ndarray
    steps: int
    realizations: int
    method: str = "full"
    burn_in: int = 0
    resample_count: int = 0
    per_realization: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def n_internal(self) -> int:
        return len(self.gammas) // 2

    def antisymmetry_defect(self) -> float:
        """max_j |gamma_j + gamma_{2N+1-j}|; only meaningful for real z."""
        return float(_pair_defect(self.gammas).max())

    def antisymmetry_ok(self, k_sigma: float = 3.0) -> bool:
        band = k_sigma * (self.std_errors + self.std_errors[::-1])
        return bool(np.all(_pair_defect(self.gammas) <= band))

    def zero_sum(self) -> float:
        return float(self.gammas.sum())

    def zero_sum_ok(self, k_sigma: float = 3.0) -> bool:
        return abs(self.zero_sum()) <= k_sigma * float(self.std_errors.sum())

    def gaps(self) -> np.ndarray:
        return -np.diff(self.gammas)

    def gap_bands(self, k_sigma: float = 3.0) -> np.ndarray:
        return k_sigma * (self.std_errors[:-1] + self.std_errors[1:])

    def is_simple(self, k_sigma: float = 3.0) -> bool:
        return bool(np.all(self.gaps() > self.gap_bands(k_sigma)))


@dataclass(frozen=True, eq=False)
class SectorSpectrum:
    xis_plus: np.ndarray
    xis_minus: np.ndarray
    std_errors_plus: np.ndarray
    std_errors_minus: np.ndarray
    steps: int = 0
    realizations: int = 0
    burn_in: int = 0
    exact: bool = False

    @property
    def n_internal(self) -> int:
        return len(self.xis_plus)

    @property
    def xis(self) -> np.ndarray:
        return self.xis_plus

    @property
    def std_errors(self) -> np.ndarray:
        return self.std_errors_plus

    def full_spectrum(self) -> tuple[np.ndarray, np.ndarray]:
        """Per-site 2N spectrum at z = 0 implied by the two sectors."""
        vals = 0.5 * np.concatenate([self.xis_plus, self.xis_minus])
        errs = 0.5 * np.concatenate([self.std_errors_plus, self.std_errors_minus])
        order = np.argsort(-vals, kind="stable")
        return vals[order], errs[order]


# --------------------------------------------------------------------------
# engine
# --------------------------------------------------------------------------

def _even_checkpoints(start: int, stop: int, parts: int) -> list[int]:
    return [start + int(round((stop - start) * b / parts)) for b in range(parts + 1)]


def _grouped(maps: np.ndarray, group: int) -> np.ndarray:
    """Products of ``group`` consecutive maps (later maps on the left)."""
    length = maps.shape[0]
    if group <= 1 or length <= 1:
        return maps
    full = (length // group) * group
    parts = []
    if full:
        m = maps[:full].reshape((length // group, group) + maps.shape[1:])
        prod = m[:, 0]
        for i in range(1, group):
            prod = np.matmul(m[:, i], prod)
        parts.append(prod)
    if full < length:
        tail = maps[full]
        for i in range(full + 1, length):
            tail = maps[i] @ tail
        parts.append(tail[None])
    return np.concatenate(parts) if len(parts) > 1 else parts[0]


def _run(make_maps, dim: int, batch: tuple, checkpoints: Sequence[int],
         chunk: int, group: int) -> np.ndarray:
    """Reference numpy propagation over steps 1 .. checkpoints[-1].

    ``make_maps(first, count)`` returns maps for steps first .. first+count-1
    with shape ``(count,) + batch + (dim, dim)``.  Returns log sums at each
    checkpoint, shape ``(len(checkpoints),) + batch + (dim,)``.
    """
    acc = ProductAccumulator(dim, batch=batch, reorth_period=1)
    out = []
    done = 0
    for stop in checkpoints:
        while done < stop:
            count = min(chunk, stop - done)
            maps = make_maps(done + 1, count)
            if dim == 1:
                acc.push_many(maps)
            else:
                for g in _grouped(maps, group):
                    acc.push(g)
            done += count
        acc.deflate()
        out.append(acc.log_sums.copy())
    return np.stack(out)


def _chunk_len(n_internal: int) -> int:
    # depends on N only, so the deflation schedule of a realization never
    # depends on how realizations are batched or split across threads
    return int(max(64, min(2048, _CHUNK_ELEMENTS // (64 * n_internal * n_internal))))


class _Counter:
    def __init__(self):
        self.value = 0


def _blocks(config: ModelConfig, indices, sites, counter: _Counter, factor: bool = False):
    """Blocks for a chunk of sites, stacked as (site, realization, N, N)."""
    drawn = hopping_chunk(config, indices, sites, factor)
    counter.value += int(drawn[1].sum())
    onsite = onsite_chunk(config, indices, sites)
    if factor:
        return drawn[0], onsite, drawn[2], drawn[3]
    return drawn[0], onsite


def _segments(checkpoints: Sequence[int], chunk: int):
    """(first step, count, checkpoint reached) triples covering the run."""
    done = 0
    for c, stop in enumerate(checkpoints):
        while done < stop:
            count = min(chunk, stop - done)
            yield done + 1, count, None
            done += count
        yield done, 0, c


def _full_log_sums(config: ModelConfig, z: complex, indices, checkpoints, group, backend):
    n = config.n_internal
    counter = _Counter()
    chunk = _chunk_len(n)
    if backend == "numpy":
        def make_maps(first, count):
            hop, onsite = _blocks(config, indices, np.arange(first, first + count), counter)
            return transfer_blocks(hop, z, onsite)
        return _run(make_maps, 2 * n, (len(indices),), checkpoints, chunk, group), counter.value

    frames = np.zeros((len(indices), 2 * n, 2 * n), dtype=np.complex128)
    frames[:] = np.eye(2 * n)
    log_sums = np.zeros((len(indices), 2 * n))
    out = np.zeros((len(checkpoints),) + log_sums.shape)
    zero = None
    for first, count, reached in _segments(checkpoints, chunk):
        if reached is not None:
            out[reached] = log_sums
            continue
        hop, onsite, lu, piv = _blocks(config, indices, np.arange(first, first + count), counter, True)
        if onsite is None:
            if zero is None or zero.shape != hop.shape:
                zero = np.zeros_like(hop)
            onsite = zero
        if _kernels.full_propagate(hop, lu, piv, onsite, complex(z), frames, log_sums, group) != _kernels.OK:
            raise RankDeficient("propagated frame degenerated")
    return out, counter.value


def _sector_log_sums(config: ModelConfig, indices, checkpoints, group, backend):
    n = config.n_internal
    counter = _Counter()
    chunk = _chunk_len(n)

    def sites_for(first, count):
        # sector step x uses sites 2x, 2x+1 (odd sector) and 2x+1, 2x+2 (even)
        return np.arange(2 * first, 2 * (first + count) + 1)

    if backend == "numpy":
        def make_maps(first, count):
            hop, _ = _blocks(config, indices, sites_for(first, count), counter)
            odd = zero_energy_sector_step(hop[1:-1:2], hop[0:-2:2])
            even = zero_energy_sector_step(hop[2::2], hop[1:-1:2])
            return np.stack([odd, even], axis=1)
        return _run(make_maps, n, (2, len(indices)), checkpoints, chunk, group), counter.value

    frames = np.zeros((2, len(indices), n, n), dtype=np.complex128)
    frames[:] = np.eye(n)
    log_sums = np.zeros((2, len(indices), n))
    out = np.zeros((len(checkpoints),) + log_sums.shape)
    for first, count, reached in _segments(checkpoints, chunk):
        if reached is not None:
            out[reached] = log_sums
            continue
        hop, _, lu, piv = _blocks(config, indices, sites_for(first, count), counter, True)
        if _kernels.sector_propagate(hop, lu, piv, frames, log_sums, group) != _kernels.OK:
            raise RankDeficient("propagated sector frame degenerated")
    return out, counter.value


_MAX_BATCH = 64


def _collect(worker, indices, threads: Threads, axis: int, backend: str):
    """Run ``worker`` over realization indices; concatenate in index order."""
    if backend not in ("compiled", "numpy"):
        raise ValueError(f"unknown backend {backend!r}")

    def run_part(part):
        pieces = [worker(part[i:i + _MAX_BATCH]) for i in range(0, len(part), _MAX_BATCH)]
        return np.concatenate([p[0] for p in pieces], axis=axis), sum(p[1] for p in pieces)

    parts = map_indices(run_part, list(indices), threads)
    sums = np.concatenate([p[0] for p in parts], axis=axis)
    return sums, sum(p[1] for p in parts)


def _rates(sums: np.ndarray, checkpoints: Sequence[int], n_real: int):
    """Estimates and standard errors from checkpointed log sums.

    ``sums`` has shape (n_checkpoints, ..., R, k); checkpoint 0 is the end of
    burn-in.  Across-realization SE for R >= 8, pooled batch means otherwise.
    """
    cp = np.asarray(checkpoints, dtype=float)
    span = cp[-1] - cp[0]
    per_real = (sums[-1] - sums[0]) / span
    values = per_real.mean(axis=-2)
    if n_real >= 8:
        se = per_real.std(axis=-2, ddof=1) / np.sqrt(n_real)
    else:
        widths = np.diff(cp).reshape((-1,) + (1,) * (sums.ndim - 1))
        batch = np.diff(sums, axis=0) / widths
        batch = np.moveaxis(batch, 0, -2)  # (..., R, B, k)
        batch = batch.reshape(batch.shape[:-3] + (-1, batch.shape[-1]))
        se = batch.std(axis=-2, ddof=1) / np.sqrt(batch.shape[-2])
    return values, se, per_real


def _check_steps(steps: int, realizations: int, burn_in: Optional[int]) -> int:
    steps = int(steps)
    if steps < MIN_STEPS:
        raise ValueError(f"steps must be >= {MIN_STEPS}")
    if steps % 2:
        raise ValueError("steps must be even so that alpha0/alpha1 periods complete")
    if int(realizations) < 1:
        raise ValueError("realizations must be >= 1")
    if burn_in is None:
        burn_in = min(1000, steps // 10)
    burn_in = int(burn_in)
    burn_in -= burn_in % 2
    if not 0 <= burn_in <= steps - N_BATCHES * 2:
        raise ValueError("burn_in leaves too few steps")
    return burn_in


def _batch_checkpoints(burn_in: int, steps: int) -> list[int]:
    cps = _even_checkpoints(burn_in, steps, N_BATCHES)
    return [c - c % 2 for c in cps[:-1]] + [steps]


# --------------------------------------------------------------------------
# public operations
# --------------------------------------------------------------------------

def estimate_spectrum(config: ModelConfig, z: complex, steps: int = 100_000, realizations: int = 8,
                      burn_in: Optional[int] = None, threads: Threads = 1,
                      gap_test: bool = False, group: int = 2, backend: str = "compiled") -> LyapunovEstimate:
    """Full 2N Lyapunov spectrum at energy ``z``.

    ``steps`` counts transfer matrices A_1 .. A_steps per realization; the
    rate is taken over the steps after ``burn_in`` (default
    ``min(1000, steps // 10)``).  ``group`` consecutive matrices are
    multiplied before each QR step.  ``backend="numpy"`` runs the reference
    implementation built on :class:`ProductAccumulator`.
    """
    burn_in = _check_steps(steps, realizations, burn_in)
    z = complex(z)
    cps = _batch_checkpoints(burn_in, steps)
    sums, resampled = _collect(
        lambda idx: _full_log_sums(config, z, idx, cps, group, backend), range(realizations), threads, axis=1, backend=backend)
    values, se, per_real = _rates(sums, cps, realizations)
    order = np.argsort(-values, kind="stable")
    est = LyapunovEstimate(z, values[order], se[order], int(steps), int(realizations), "full",
                           burn_in, resampled, per_real[:, order])
    if gap_test:
        n = config.n_internal
        if np.any(est.std_errors > 0.5 * abs(est.gammas[n - 1])):
            raise InsufficientSteps(
                f"standard error {est.std_errors.max():.3e} exceeds half of |gamma_N| = {abs(est.gammas[n - 1]):.3e}")
    return est


def sector_spectrum_zero(config: ModelConfig, steps: int = 100_000, realizations: int = 8,
                         burn_in: Optional[int] = None, threads: Threads = 1,
                         group: int = 4, backend: str = "compiled") -> SectorSpectrum:
    """Exponents of the two zero-energy sector cocycles.

    ``steps`` counts sector-map applications (two sites each).
    """
    if not config.is_chiral:
        raise NotChiral("zero-energy sectors need the chiral model (no onsite term)")
    burn_in = _check_steps(steps, realizations, burn_in)
    cps = _batch_checkpoints(burn_in, steps)
    sums, _ = _collect(lambda idx: _sector_log_sums(config, idx, cps, group, backend),
                       range(realizations), threads, axis=2, backend=backend)
    values, se, _ = _rates(sums, cps, realizations)
    out = []
    for s in range(2):
        order = np.argsort(-values[s], kind="stable")
        out += [values[s][order], se[s][order]]
    return SectorSpectrum(out[0], out[2], out[1], out[3], int(steps), int(realizations), burn_in)


def spectrum_vs_energy(config: ModelConfig, lambda_grid: Sequence[float], steps: int = 100_000,
                       realizations: int = 8, **kwargs) -> list[LyapunovEstimate]:
    """One estimate per energy; every point reuses the same disorder streams."""
    grid = list(lambda_grid)
    if not grid:
        raise ValueError("lambda_grid is empty")
    return [estimate_spectrum(config, lam, steps, realizations, **kwargs) for lam in grid]


def ginibre_closed_form(sigma0: float, sigma1: float, n_internal: int) -> SectorSpectrum:
    """The degenerate spectrum xi_j = log(sigma0 / sigma1) for all j.

    Exact for N = 1 only; for N > 1 see :func:`ginibre_sector_exact`.
    """
    if not (sigma0 > 0 and sigma1 > 0):
        raise ValueError("sigmas must be positive")
    xi = np.full(n_internal, np.log(sigma0 / sigma1))
    zero = np.zeros(n_internal)
    return SectorSpectrum(xi, -xi, zero, zero.copy(), exact=True)


def ginibre_sector_exact(sigma0: float, sigma1: float, n_internal: int) -> SectorSpectrum:
    """Exact sector exponents for independent Ginibre hoppings.

    The map -T_odd° T_even is a product of a Ginibre matrix and the inverse
    adjoint of an independent one, so by unitary invariance

        xi_j = log(sigma0 / sigma1) + (psi(N - j + 1) - psi(j)) / 2,

    psi the digamma function.  Reduces to log(sigma0 / sigma1) when N = 1.
    """
    if not (sigma0 > 0 and sigma1 > 0):
        raise ValueError("sigmas must be positive")
    j = np.arange(1, n_internal + 1)
    spread = 0.5 * (digamma(n_internal - j + 1) - digamma(j))
    plus = np.log(sigma0 / sigma1) + spread
    minus = np.log(sigma1 / sigma0) + spread
    zero = np.zeros(n_internal)
    return SectorSpectrum(plus, minus, zero, zero.copy(), exact=True)


class Verdict(str, enum.Enum):
    LOCALIZED = "localized"
    CRITICAL = "critical"
    INCONCLUSIVE = "inconclusive"


def localized_at_zero(spec, k_sigma: float = 3.0) -> Verdict:
    """Decision rule for 0 not in the Lyapunov spectrum.

    Accepts a :class:`SectorSpectrum` (both sectors are used) or a
    :class:`LyapunovEstimate`.
    """
    if isinstance(spec, SectorSpectrum):
        vals = np.concatenate([spec.xis_plus, spec.xis_minus])
        errs = np.concatenate([spec.std_errors_plus, spec.std_errors_minus])
    else:
        vals, errs = np.asarray(spec.gammas), np.asarray(spec.std_errors)
    if not np.all(np.isfinite(errs)):
        raise ValueError("standard errors must be finite")
    mag = np.abs(vals)
    if np.all(mag > k_sigma * errs):
        return Verdict.LOCALIZED
    if np.any(mag <= errs):
        return Verdict.CRITICAL
    return Verdict.INCONCLUSIVE


# --------------------------------------------------------------------------
# serialization
# --------------------------------------------------------------------------

SPECTRUM_COLUMNS = ("z_re", "z_im", "j", "gamma", "stderr", "steps", "realizations")


def spectrum_rows(estimates: Sequence[LyapunovEstimate]):
    for est in estimates:
        for j, (g, e) in enumerate(zip(est.gammas, est.std_errors), start=1):
            yield (float(est.z.real), float(est.z.imag), j, float(g), float(e), est.steps, est.realizations)


def sector_rows(spec: SectorSpectrum):
    for sector, vals, errs in (("plus", spec.xis_plus, spec.std_errors_plus),
                               ("minus", spec.xis_minus, spec.std_errors_minus)):
        for j, (x, e) in enumerate(zip(vals, errs), start=1):
            yield (0.0, 0.0, j, float(x), float(e), spec.steps, spec.realizations, sector)


def write_spectrum(path, estimates: Sequence[LyapunovEstimate], meta=None):
    return write_csv(path, SPECTRUM_COLUMNS, spectrum_rows(estimates), meta)


def write_sector(path, spec: SectorSpectrum, meta=None):
    return write_csv(path, SPECTRUM_COLUMNS + ("sector",), sector_rows(spec), meta)


def write_summary(path, spec, meta=None, k_sigma: float = 3.0):
    payload = {"localized_at_zero": localized_at_zero(spec, k_sigma).value, "k_sigma": k_sigma}
    if isinstance(spec, SectorSpectrum):
        payload.update(xis_plus=spec.xis_plus, xis_minus=spec.xis_minus,
                       std_errors_plus=spec.std_errors_plus, std_errors_minus=spec.std_errors_minus)
    else:
        payload.update(gammas=spec.gammas, std_errors=spec.std_errors,
                       antisymmetry_defect=spec.antisymmetry_defect(), zero_sum=spec.zero_sum())
    return write_json(path, payload, meta)
