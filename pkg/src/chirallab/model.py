"""Disorder ensembles, realization sampling and Hamiltonian assembly.

The chiral strip Hamiltonian acts on sequences of C^N vectors as

    (H psi)_n = T_{n+1}^* psi_{n+1} + T_n psi_{n-1}   (+ V_n psi_n, Wegner variant)

Hopping blocks on even sites follow ``alpha0`` and on odd sites ``alpha1``;
parity is absolute (``n % 2``), not relative to the window start.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Union

import numpy as np

from . import seeding
from . import _kernels
from .exceptions import ResampleLimit, SingularHopping, WindowMismatch
from .linalg import as_cmatrix

MAX_RESAMPLE = 100


# --------------------------------------------------------------------------
# distributions
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class Ginibre:
    """I.i.d. circular complex Gaussian entries with E|entry|^2 = sigma^2."""

    sigma: float
    resample_threshold: float = 1e-8

    def __post_init__(self):
        if not self.sigma > 0:
            raise ValueError("Ginibre sigma must be positive")
        if not self.resample_threshold > 0:
            raise ValueError("resample_threshold must be positive")

    def words(self, n: int) -> int:
        return 2 * n * n

    def draw(self, keys, attempt: int, n: int) -> np.ndarray:
        z = seeding.complex_normals(keys, attempt * n * n, n * n, self.sigma)
        return z.reshape(z.shape[:-1] + (n, n))


@dataclass(frozen=True)
class DiagonalComplexUniform:
    """Diagonal blocks, modulus uniform in [radius_min, radius_max], uniform phase."""

    radius_min: float
    radius_max: float
    resample_threshold: float = 1e-8

    def __post_init__(self):
        if not 0 < self.radius_min <= self.radius_max:
            raise ValueError("need 0 < radius_min <= radius_max")

    def draw(self, keys, attempt: int, n: int) -> np.ndarray:
        u = seeding.uniforms(seeding.stream_words(keys, attempt * 2 * n, 2 * n))
        radius = self.radius_min + (self.radius_max - self.radius_min) * u[..., 0::2]
        diag = radius * np.exp(2j * np.pi * u[..., 1::2])
        out = np.zeros(diag.shape + (n,), dtype=np.complex128)
        idx = np.arange(n)
        out[..., idx, idx] = diag
        return out


@dataclass(frozen=True, eq=False)
class ShiftedGinibre:
    """``base + Ginibre(sigma)``."""

    base: np.ndarray
    sigma: float
    resample_threshold: float = 1e-8

    def __post_init__(self):
        object.__setattr__(self, "base", as_cmatrix(self.base, "base"))
        if not self.sigma > 0:
            raise ValueError("ShiftedGinibre sigma must be positive")

    def draw(self, keys, attempt: int, n: int) -> np.ndarray:
        if self.base.shape != (n, n):
            raise ValueError(f"base has shape {self.base.shape}, expected {(n, n)}")
        return self.base + Ginibre(self.sigma).draw(keys, attempt, n)


@dataclass(frozen=True, eq=False)
class Fixed:
    """Deterministic hopping block.

    Not absolutely continuous; only meant for closed-form checks such as the
    free chain ``T = 1``.
    """

    matrix: np.ndarray
    resample_threshold: float = 1e-8

    def __post_init__(self):
        object.__setattr__(self, "matrix", as_cmatrix(self.matrix, "matrix"))

    def draw(self, keys, attempt: int, n: int) -> np.ndarray:
        if self.matrix.shape != (n, n):
            raise ValueError(f"matrix has shape {self.matrix.shape}, expected {(n, n)}")
        keys = np.asarray(keys)
        return np.broadcast_to(self.matrix, keys.shape + (n, n)).copy()


DistributionSpec = Union[Ginibre, DiagonalComplexUniform, ShiftedGinibre, Fixed]


@dataclass(frozen=True)
class GUE:
    """Onsite law of the Wegner orbital model: ``scale * (G + G^*) / 2``, G standard Ginibre."""

    scale: float = 1.0

    def draw(self, keys, n: int) -> np.ndarray:
        g = Ginibre(1.0).draw(keys, 0, n)
        return self.scale * 0.5 * (g + np.conj(np.swapaxes(g, -1, -2)))


@dataclass(frozen=True)
class ModelConfig:
    n_internal: int
    alpha0: DistributionSpec
    alpha1: DistributionSpec
    onsite: Optional[GUE] = None
    seed: int = 0

    def __post_init__(self):
        if int(self.n_internal) < 1:
            raise ValueError("n_internal must be >= 1")
        object.__setattr__(self, "n_internal", int(self.n_internal))
        object.__setattr__(self, "seed", int(self.seed) & seeding.MASK)

    @property
    def is_chiral(self) -> bool:
        return self.onsite is None

    def law(self, n: int) -> DistributionSpec:
        return self.alpha0 if n % 2 == 0 else self.alpha1


# --------------------------------------------------------------------------
# sampling
# --------------------------------------------------------------------------

def _too_singular(blocks: np.ndarray, threshold: float, lower: Optional[np.ndarray] = None) -> np.ndarray:
    """Mask of blocks whose smallest singular value is below ``threshold``.

    Uses the bound sigma_min >= |det| / ||T||_F^(n-1) first and only runs an
    SVD where that bound is inconclusive.
    """
    n = blocks.shape[-1]
    if lower is None:
        flat = np.ascontiguousarray(blocks.reshape((-1, n, n)))
        lower = _kernels.sigma_lower_bounds(flat)
    lower = np.asarray(lower).reshape(blocks.shape[:-2])
    unsure = ~(lower >= threshold)
    bad = np.zeros(blocks.shape[:-2], dtype=bool)
    if np.any(unsure):
        sv = np.linalg.svd(blocks[unsure], compute_uv=False)
        bad[unsure] = sv[..., -1] < threshold
    return bad


def _draw_checked(spec: DistributionSpec, n: int, keys: np.ndarray, factor: bool = False):
    """Draw one block per key, redrawing blocks with sigma_min below threshold.

    Returns ``(blocks, counts)``, plus the LU factors of the adjoints
    ``(lu, piv)`` when ``factor`` is set.
    """
    keys = np.asarray(keys, dtype=np.uint64).reshape(-1)
    blocks = np.ascontiguousarray(spec.draw(keys, 0, n), dtype=np.complex128)
    counts = np.zeros(keys.shape, dtype=np.int64)
    lu, piv, lower = _kernels.lu_adjoint(blocks)
    todo = np.flatnonzero(_too_singular(blocks, spec.resample_threshold, lower))
    attempt = 0
    while todo.size:
        attempt += 1
        if attempt > MAX_RESAMPLE:
            raise ResampleLimit(f"{todo.size} block(s) still singular after {MAX_RESAMPLE} redraws")
        fresh = np.ascontiguousarray(spec.draw(keys[todo], attempt, n), dtype=np.complex128)
        f_lu, f_piv, f_lower = _kernels.lu_adjoint(fresh)
        blocks[todo], lu[todo], piv[todo] = fresh, f_lu, f_piv
        counts[todo] += 1
        todo = todo[_too_singular(fresh, spec.resample_threshold, f_lower)]
    if factor:
        return blocks, counts, lu, piv
    return blocks, counts


def sample_hopping(spec: DistributionSpec, n_internal: int, key: int) -> tuple[np.ndarray, int]:
    """One hopping block from the stream ``key``; returns ``(T, resample_count)``."""
    blocks, counts = _draw_checked(spec, n_internal, np.array([key], dtype=np.uint64))
    return blocks[0], int(counts[0])


def hopping_chunk(config: ModelConfig, indices, sites, factor: bool = False):
    """Hopping blocks for several realizations at once.

    Returns ``(blocks, resamples)`` with ``blocks`` of shape
    ``(len(sites), len(indices), N, N)`` and per-realization resample
    counts; with ``factor`` also the LU factors of the adjoint blocks used
    by the compiled propagation kernels.
    """
    sites = np.asarray(sites, dtype=np.int64).reshape(-1)
    indices = [int(i) for i in indices]
    n = config.n_internal
    shape = (sites.size, len(indices), n, n)
    out = np.empty(shape, dtype=np.complex128)
    lu = np.empty(shape, dtype=np.complex128) if factor else None
    piv = np.empty(shape[:-1], dtype=np.int64) if factor else None
    counts = np.zeros(len(indices), dtype=np.int64)
    consecutive = sites.size > 1 and bool(np.all(np.diff(sites) == 1))
    for parity, spec in ((0, config.alpha0), (1, config.alpha1)):
        if consecutive:
            sel = slice((parity - sites[0]) % 2, None, 2)
            if sites[sel].size == 0:
                continue
        else:
            sel = np.flatnonzero(sites % 2 == parity)
            if sel.size == 0:
                continue
        keys = seeding.derive_seed_grid(config.seed, indices, sites[sel], parity)
        drawn = _draw_checked(spec, n, keys.reshape(-1), factor)
        out[sel] = drawn[0].reshape(keys.shape + (n, n))
        counts += drawn[1].reshape(keys.shape).sum(axis=0)
        if factor:
            lu[sel] = drawn[2].reshape(keys.shape + (n, n))
            piv[sel] = drawn[3].reshape(keys.shape + (n,))
    if factor:
        return out, counts, lu, piv
    return out, counts


def hopping_blocks(config: ModelConfig, index: int, sites) -> tuple[np.ndarray, int]:
    """Hopping blocks ``T_n`` for the given sites of realization ``index``.

    Each block comes from its own stream keyed by (seed, index, n, n % 2),
    so any subset of sites can be generated in any order.  Returns
    ``(blocks, total_resamples)``.
    """
    sites = np.asarray(sites, dtype=np.int64)
    out, counts = hopping_chunk(config, [index], sites.reshape(-1))
    return out[:, 0].reshape(sites.shape + out.shape[-2:]), int(counts[0])


def onsite_chunk(config: ModelConfig, indices, sites) -> Optional[np.ndarray]:
    """GUE onsite blocks, shape ``(len(sites), len(indices), N, N)``; None if chiral."""
    if config.onsite is None:
        return None
    sites = np.asarray(sites, dtype=np.int64).reshape(-1)
    keys = seeding.derive_seed_grid(config.seed, list(indices), sites, seeding.TAG_ONSITE)
    n = config.n_internal
    return config.onsite.draw(keys.reshape(-1), n).reshape(keys.shape + (n, n))


def onsite_blocks(config: ModelConfig, index: int, sites) -> Optional[np.ndarray]:
    if config.onsite is None:
        return None
    sites = np.asarray(sites, dtype=np.int64)
    keys = seeding.derive_seeds(config.seed, index, sites, seeding.TAG_ONSITE)
    return config.onsite.draw(keys, config.n_internal)


@dataclass(frozen=True, eq=False)
class Realization:
    """Hopping (and onsite) blocks on the integer window ``[a, b]``."""

    window: tuple[int, int]
    hopping: np.ndarray
    onsite: Optional[np.ndarray] = None
    seed: int = 0
    index: int = 0
    resample_count: int = 0

    @property
    def n_internal(self) -> int:
        return self.hopping.shape[-1]

    def __len__(self) -> int:
        return self.window[1] - self.window[0] + 1

    def t(self, n: int) -> np.ndarray:
        a, b = self.window
        if not a <= n <= b:
            raise WindowMismatch(f"site {n} outside window {self.window}")
        return self.hopping[n - a]

    def v(self, n: int) -> np.ndarray:
        a, b = self.window
        if not a <= n <= b:
            raise WindowMismatch(f"site {n} outside window {self.window}")
        if self.onsite is None:
            return np.zeros((self.n_internal,) * 2, dtype=np.complex128)
        return self.onsite[n - a]


def realization_from_blocks(hopping, window=None, onsite=None) -> Realization:
    """Wrap explicit hopping blocks (e.g. scalars) as a realization starting at site 1."""
    h = np.asarray(hopping, dtype=np.complex128)
    if h.ndim == 1:
        h = h[:, None, None]
    if window is None:
        window = (1, h.shape[0])
    if window[1] - window[0] + 1 != h.shape[0]:
        raise WindowMismatch("window length does not match number of blocks")
    if onsite is not None:
        onsite = np.asarray(onsite, dtype=np.complex128)
        if onsite.ndim == 1:
            onsite = onsite[:, None, None]
    return Realization(window=tuple(window), hopping=h, onsite=onsite)


def sample_realization(config: ModelConfig, window: tuple[int, int], realization_index: int = 0) -> Realization:
    a, b = int(window[0]), int(window[1])
    if b < a:
        raise ValueError(f"empty window {window}")
    sites = np.arange(a, b + 1)
    hop, resampled = hopping_blocks(config, realization_index, sites)
    hop.setflags(write=False)
    onsite = onsite_blocks(config, realization_index, sites)
    if onsite is not None:
        onsite.setflags(write=False)
    return Realization((a, b), hop, onsite, config.seed, realization_index, resampled)


# --------------------------------------------------------------------------
# Hamiltonians
# --------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class FiniteHamiltonian:
    """Dirichlet restriction of H to ``[a, b]``."""

    window: tuple[int, int]
    n_internal: int
    matrix: np.ndarray
    hopping: np.ndarray
    onsite: Optional[np.ndarray] = None
    realization: Optional[Realization] = field(default=None, repr=False)

    @property
    def is_chiral(self) -> bool:
        return self.onsite is None

    @property
    def sites(self) -> np.ndarray:
        return np.arange(self.window[0], self.window[1] + 1)

    def chirality(self) -> np.ndarray:
        """Diagonal of Pi = (-1)^X on the full Hilbert space."""
        return np.repeat(np.where(self.sites % 2 == 0, 1.0, -1.0), self.n_internal)

    def block(self, x: int, y: int) -> np.ndarray:
        a = self.window[0]
        n = self.n_internal
        i, j = (x - a) * n, (y - a) * n
        return self.matrix[i:i + n, j:j + n]


def assemble_hamiltonian(r: Realization, window: Optional[tuple[int, int]] = None) -> FiniteHamiltonian:
    """Block-tridiagonal H on ``window`` (default: the realization's window).

    Uses T_{a+1} .. T_b; T_a only enters transfer matrices, not H.
    """
    a, b = r.window if window is None else (int(window[0]), int(window[1]))
    ra, rb = r.window
    if a < ra or b > rb or b < a:
        raise WindowMismatch(f"window {(a, b)} not covered by realization on {r.window}")
    n = r.n_internal
    length = b - a + 1
    h = np.zeros((length * n, length * n), dtype=np.complex128)
    hop = r.hopping[a - ra:b - ra + 1]
    for s in range(1, length):
        t = hop[s]
        h[s * n:(s + 1) * n, (s - 1) * n:s * n] = t
        h[(s - 1) * n:s * n, s * n:(s + 1) * n] = t.conj().T
    onsite = None
    if r.onsite is not None:
        onsite = r.onsite[a - ra:b - ra + 1]
        for s in range(length):
            h[s * n:(s + 1) * n, s * n:(s + 1) * n] = onsite[s]
    return FiniteHamiltonian((a, b), n, h, hop[1:], onsite, r)


# --------------------------------------------------------------------------
# 2-periodic chains
# --------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class BandData:
    k: np.ndarray
    singular_values: np.ndarray  # (k_grid, N), descending per row
    gap: float  # min over the grid of the smallest singular value (gap of |H|)

    @property
    def inf_h_squared(self) -> float:
        return self.gap ** 2


def bloch_symbol(a_block, b_block, k) -> np.ndarray:
    """Off-diagonal Bloch block ``A e^{-ik} + B^*`` (maps odd to even sublattice)."""
    a = as_cmatrix(a_block)
    b = as_cmatrix(b_block)
    k = np.atleast_1d(np.asarray(k, dtype=float))
    return a[None] * np.exp(-1j * k)[:, None, None] + b.conj().T[None]


def bloch_spectrum(a_block, b_block, k_grid: int) -> BandData:
    """Singular values of the Bloch symbol on ``k_grid`` uniform momenta.

    ``a_block`` sits on every even bond and ``b_block`` on every odd one;
    sigma(H^2) is the union over k of the squared singular values.
    """
    if k_grid < 2:
        raise ValueError("k_grid must be >= 2")
    k = 2 * np.pi * np.arange(k_grid) / k_grid
    sv = np.linalg.svd(bloch_symbol(a_block, b_block, k), compute_uv=False)
    return BandData(k, sv, float(sv[:, -1].min()))


def bloch_infimum(a_block, b_block, k_grid: int = 512) -> float:
    """inf over the circle of the smallest singular value of the Bloch symbol.

    The grid minimum is refined by a bounded scalar minimization on the two
    neighbouring grid cells, so the result does not overshoot the true
    infimum by the O(dk^2) grid error.
    """
    from scipy.optimize import minimize_scalar

    band = bloch_spectrum(a_block, b_block, k_grid)
    i = int(np.argmin(band.singular_values[:, -1]))
    dk = 2 * np.pi / k_grid

    def smallest(k):
        return float(np.linalg.svd(bloch_symbol(a_block, b_block, k)[0], compute_uv=False)[-1])

    res = minimize_scalar(smallest, bounds=(band.k[i] - dk, band.k[i] + dk), method="bounded",
                          options={"xatol": 1e-12})
    return min(band.gap, float(res.fun))


def periodic_gap_bound(a_block, b_block) -> float:
    """||A|| ||B|| dist(sigma(|A^-1 B|), 1) dist(sigma(|A B^-1|), 1)."""
    a = as_cmatrix(a_block)
    b = as_cmatrix(b_block)
    for m in (a, b):
        if np.linalg.svd(m, compute_uv=False)[-1] < 1e-14 * max(np.abs(m).max(), 1e-300):
            raise SingularHopping("periodic hopping block is singular")
    s1 = np.linalg.svd(np.linalg.solve(a, b), compute_uv=False)
    s2 = np.linalg.svd(a @ np.linalg.inv(b), compute_uv=False)
    return float(np.linalg.norm(a, 2) * np.linalg.norm(b, 2)
                 * np.abs(s1 - 1).min() * np.abs(s2 - 1).min())


def periodic_hamiltonian(a_block, b_block, cells: int) -> np.ndarray:
    """2-periodic chain of ``cells`` unit cells with periodic boundary conditions.

    Sites run 0 .. 2*cells-1; site n is joined to n-1 by A (n even) or B (n odd).
    """
    a = as_cmatrix(a_block)
    b = as_cmatrix(b_block)
    n = a.shape[0]
    length = 2 * cells
    h = np.zeros((length * n, length * n), dtype=np.complex128)
    for s in range(length):
        t = a if s % 2 == 0 else b
        p = (s - 1) % length
        h[s * n:(s + 1) * n, p * n:(p + 1) * n] += t
        h[p * n:(p + 1) * n, s * n:(s + 1) * n] += t.conj().T
    return h


def dump_realization_csv(r: Realization, path) -> None:
    """Write hopping blocks as CSV rows ``n,row,col,re,im``."""
    a = r.window[0]
    with open(path, "w", newline="") as fh:
        fh.write("n,row,col,re,im\n")
        for s, t in enumerate(r.hopping):
            for i in range(t.shape[0]):
                for j in range(t.shape[1]):
                    fh.write(f"{a + s},{i},{j},{t[i, j].real:.17g},{t[i, j].imag:.17g}\n")
