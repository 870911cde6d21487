"""Counter-based random streams.

Every random block in the laboratory is drawn from its own stream, keyed by
``(master seed, realization index, site, tag)``.  Keys and stream words are
built from the SplitMix64 finalizer, so the whole scheme is a few lines of
64-bit integer arithmetic that any implementation can reproduce bit for bit:

    mix64(z):
        z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9
        z = (z ^ (z >> 27)) * 0x94D049BB133111EB
        return z ^ (z >> 31)

    derive_seed(master, index, site, tag):
        k = mix64(master + GOLDEN)
        for field in (index, site, tag):        # each reduced mod 2**64
            k = mix64((k ^ field) + GOLDEN)
        return k

    word(key, j) = mix64(key + (j + 1) * GOLDEN)      # j = 0, 1, 2, ...
    uniform(w)   = ((w >> 11) + 0.5) * 2**-53        # open interval (0, 1)

with ``GOLDEN = 0x9E3779B97F4A7C15`` and all arithmetic modulo 2**64.  For a
fixed prefix each absorption step is a bijection of the new field, so keys
of different sites in one realization never collide.
"""
from __future__ import annotations

import numpy as np

GOLDEN = 0x9E3779B97F4A7C15
MASK = (1 << 64) - 1

TAG_EVEN = 0
TAG_ODD = 1
TAG_ONSITE = 2
TAG_BOOTSTRAP = 3

_U = np.uint64
_C1 = _U(0xBF58476D1CE4E5B9)
_C2 = _U(0x94D049BB133111EB)
_G = _U(GOLDEN)


def mix64(z: int) -> int:
    z &= MASK
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK
    return z ^ (z >> 31)


def derive_seed(master: int, realization_index: int, site: int, tag: int) -> int:
    """Stream key for one ``(master, realization, site, tag)`` tuple."""
    k = mix64(master + GOLDEN)
    for field in (realization_index, site, tag):
        k = mix64(((k ^ (field & MASK)) + GOLDEN) & MASK)
    return k


def _mix64_array(z: np.ndarray) -> np.ndarray:
    z = (z ^ (z >> _U(30))) * _C1
    z = (z ^ (z >> _U(27))) * _C2
    return z ^ (z >> _U(31))


def _prefix(master: int, realization_index: int) -> int:
    k = mix64(master + GOLDEN)
    return mix64(((k ^ (realization_index & MASK)) + GOLDEN) & MASK)


def derive_seeds(master: int, realization_index: int, sites, tags) -> np.ndarray:
    """Vectorized :func:`derive_seed` over arrays of sites and tags."""
    sites = np.asarray(sites, dtype=np.int64).astype(np.uint64)
    tags = np.broadcast_to(np.asarray(tags, dtype=np.int64), sites.shape).astype(np.uint64)
    with np.errstate(over="ignore"):
        k = _mix64_array((_U(_prefix(master, realization_index)) ^ sites) + _G)
        return _mix64_array((k ^ tags) + _G)


def derive_seed_grid(master: int, realization_indices, sites, tag: int) -> np.ndarray:
    """Keys for every (site, realization) pair; shape ``(len(sites), len(indices))``."""
    prefixes = np.array([_prefix(master, int(i)) for i in realization_indices], dtype=np.uint64)
    sites = np.asarray(sites, dtype=np.int64).astype(np.uint64)
    with np.errstate(over="ignore"):
        k = _mix64_array((prefixes[None, :] ^ sites[:, None]) + _G)
        return _mix64_array((k ^ _U(tag & MASK)) + _G)


def stream_words(keys, start: int, count: int) -> np.ndarray:
    """Words ``start .. start+count-1`` of each stream; shape ``keys.shape + (count,)``."""
    keys = np.asarray(keys, dtype=np.uint64)
    j = np.arange(start + 1, start + count + 1, dtype=np.uint64)
    with np.errstate(over="ignore"):
        return _mix64_array(keys[..., None] + j * _G)


def uniforms(words: np.ndarray) -> np.ndarray:
    """Map 64-bit words to doubles in the open unit interval."""
    return ((words >> _U(11)).astype(np.float64) + 0.5) * 2.0**-53


def complex_normals(keys, start: int, count: int, scale: float = 1.0) -> np.ndarray:
    """``count`` complex Gaussians per stream with E|z|^2 = 1 (two words each).

    Normal number ``c`` (counting from 0) uses words ``2c`` and ``2c + 1``
    of the stream, so ``start`` is in units of normals.  Each value is
    ``sqrt(-log u1) * exp(2 pi i u2)``: |z|^2 is a unit exponential and the
    phase is uniform, which is the circular complex Gaussian law.  Values
    are multiplied by ``scale`` inside the kernel.
    """
    from ._kernels import complex_normals as _kernel

    keys = np.asarray(keys, dtype=np.uint64)
    flat = _kernel(np.ascontiguousarray(keys.reshape(-1)), int(start), int(count), scale)
    return flat.reshape(keys.shape + (count,))
