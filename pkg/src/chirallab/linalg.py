"""Dense complex matrix primitives.

Matrices are plain ``numpy`` complex128 arrays.  Norms used for relative
tolerances are the max-row-sum norm (``opnorm``) with an absolute floor of
1e-300, since transfer products span many orders of magnitude.
"""
from __future__ import annotations

import warnings
from typing import NamedTuple

import numpy as np
import scipy.linalg as sla
from scipy.linalg import lapack

from .exceptions import BadOrder, IllConditioned, NotHermitian, RankDeficient, Singular

TINY = 1e-300
COND_LIMIT = 1e14


class QRPair(NamedTuple):
    q: np.ndarray
    r: np.ndarray


def as_cmatrix(m, name: str = "matrix") -> np.ndarray:
    """Return ``m`` as a finite 2-D complex128 array (a copy only if needed)."""
    a = np.asarray(m, dtype=np.complex128)
    if a.ndim == 0:
        a = a.reshape(1, 1)
    if a.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {a.shape}")
    if a.size == 0:
        raise ValueError(f"{name} is empty")
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} has non-finite entries")
    return a


def opnorm(m) -> float:
    """Max-row-sum norm, floored at 1e-300."""
    a = np.asarray(m)
    return max(float(np.abs(a).sum(axis=-1).max()), TINY)


def qr_pos(m) -> QRPair:
    """QR factorization with a real positive diagonal in ``R``.

    Works on a single matrix or on a stack ``(..., n, k)`` with ``n >= k``;
    the sign (phase) of each pivot is moved into ``Q`` so the factorization
    is unique.
    """
    a = np.asarray(m, dtype=np.complex128)
    q, r = np.linalg.qr(a)
    d = np.diagonal(r, axis1=-2, axis2=-1)
    mag = np.abs(d)
    if np.any(mag < TINY):
        raise RankDeficient("QR pivot below 1e-300")
    phase = d / mag
    q = q * phase[..., None, :]
    r = r * np.conj(phase)[..., :, None]
    # exact zeros below the diagonal and an exactly real diagonal
    r = np.triu(r)
    idx = np.arange(r.shape[-1])
    r[..., idx, idx] = mag
    return QRPair(q, r)


def singular_values(m) -> np.ndarray:
    """Singular values in descending order."""
    a = np.asarray(m, dtype=np.complex128)
    return np.linalg.svd(a, compute_uv=False)


def wedge_norm(m, j: int) -> float:
    """Norm of the j-th exterior power: product of the top j singular values.

    The exterior power is never materialized.
    """
    sv = singular_values(m)
    if not 0 <= j <= sv.shape[-1]:
        raise BadOrder(f"order {j} outside [0, {sv.shape[-1]}]")
    return float(np.prod(sv[:j]))


def log_wedge_norm(m, j: int) -> float:
    """``log(wedge_norm(m, j))`` without under/overflow."""
    sv = singular_values(m)
    if not 0 <= j <= sv.shape[-1]:
        raise BadOrder(f"order {j} outside [0, {sv.shape[-1]}]")
    return float(np.sum(np.log(sv[:j])))


def solve(m, rhs) -> np.ndarray:
    """Solve ``m @ x = rhs`` by pivoted LU.

    Raises :class:`Singular` on an exactly zero pivot and emits
    :class:`IllConditioned` when the estimated condition number exceeds 1e14.
    """
    a = as_cmatrix(m)
    if a.shape[0] != a.shape[1]:
        raise ValueError("solve needs a square matrix")
    b = np.asarray(rhs, dtype=np.complex128)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", sla.LinAlgWarning)
        lu, piv = sla.lu_factor(a, check_finite=False)
    if np.any(np.diag(lu) == 0):
        raise Singular("zero pivot in LU factorization")
    anorm = float(np.abs(a).sum(axis=0).max())
    rcond, info = lapack.zgecon(lu, anorm, norm="1")
    if info == 0 and (rcond == 0 or 1.0 / rcond > COND_LIMIT):
        warnings.warn(f"condition estimate {1.0 / max(rcond, TINY):.3e} above {COND_LIMIT:.0e}",
                      IllConditioned, stacklevel=2)
    return sla.lu_solve((lu, piv), b, check_finite=False)


def herm_eig(m) -> tuple[np.ndarray, np.ndarray]:
    """Eigen-decomposition of a Hermitian matrix (ascending eigenvalues)."""
    a = as_cmatrix(m)
    if a.shape[0] != a.shape[1]:
        raise NotHermitian("matrix is not square")
    asym = float(np.abs(a - a.conj().T).max())
    if asym > 1e-10 * opnorm(a):
        raise NotHermitian(f"Hermitian defect {asym:.3e}")
    return np.linalg.eigh(0.5 * (a + a.conj().T))


def dagger_inv(t) -> np.ndarray:
    """``t°`` = ``(t*)^-1`` for a single matrix or a stack."""
    return np.conj(np.swapaxes(np.linalg.inv(t), -1, -2))


def elementary_symmetric(values, k: int) -> float:
    """k-th elementary symmetric polynomial of ``values``."""
    e = np.zeros(k + 1)
    e[0] = 1.0
    for v in np.asarray(values, dtype=float):
        e[1:] = e[1:] + v * e[:-1]
    return float(e[k])
