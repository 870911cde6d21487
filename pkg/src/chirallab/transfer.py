"""Transfer matrices and their products.

With the super wave function Psi_n = (T_{n+1}^* psi_{n+1}, psi_n) the
Schroedinger equation (H - z) psi = 0 becomes Psi_n = A_n(z) Psi_{n-1} with

    A_n(z) = [[z T_n°, -T_n], [T_n°, 0]] = S(z) a(T_n),

S(z) = [[z, -1], [1, 0]] and a(T) = diag(T°, T).
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .exceptions import RankDeficient, SingularHopping, WindowMismatch
from .linalg import TINY, as_cmatrix, dagger_inv
from .model import Realization

OVERFLOW_GUARD = 1e100


def _check_hopping(t: np.ndarray) -> None:
    sv = np.linalg.svd(t, compute_uv=False)
    if np.any(sv[..., -1] <= 1e-14 * np.maximum(sv[..., 0], TINY)):
        raise SingularHopping("hopping block is singular")


def s_matrix(z: complex, n: int) -> np.ndarray:
    s = np.zeros((2 * n, 2 * n), dtype=np.complex128)
    s[:n, :n] = z * np.eye(n)
    s[:n, n:] = -np.eye(n)
    s[n:, :n] = np.eye(n)
    return s


def a_matrix(t) -> np.ndarray:
    t = as_cmatrix(t)
    n = t.shape[0]
    out = np.zeros((2 * n, 2 * n), dtype=np.complex128)
    out[:n, :n] = dagger_inv(t)
    out[n:, n:] = t
    return out


@dataclass(frozen=True, eq=False)
class TransferMatrix:
    z: complex
    n: Optional[int]
    matrix: np.ndarray


def transfer_blocks(ts, z: complex, onsite=None) -> np.ndarray:
    """A(T, z) for a stack of hopping blocks ``(..., N, N)``.

    With onsite blocks V the top-left block becomes (z - V) T°.
    """
    ts = np.asarray(ts, dtype=np.complex128)
    n = ts.shape[-1]
    tc = dagger_inv(ts)
    out = np.zeros(ts.shape[:-2] + (2 * n, 2 * n), dtype=np.complex128)
    if onsite is None:
        out[..., :n, :n] = z * tc
    else:
        out[..., :n, :n] = z * tc - np.matmul(onsite, tc)
    out[..., :n, n:] = -ts
    out[..., n:, :n] = tc
    return out


def transfer_matrix(t_n, z: complex, n: Optional[int] = None) -> TransferMatrix:
    t = as_cmatrix(t_n, "t_n")
    _check_hopping(t)
    return TransferMatrix(complex(z), n, transfer_blocks(t, z))


def zero_energy_sector_step(t_odd, t_even) -> np.ndarray:
    """Two-step zero-energy map on one chirality sector: ``-T_odd° T_even``.

    ``psi_{2x+1} = -T_{2x+1}° T_{2x} psi_{2x-1}`` on odd sites and
    ``psi_{2x+2} = -T_{2x+2}° T_{2x+1} psi_{2x}`` on even sites.
    Accepts stacks.
    """
    t_odd = np.asarray(t_odd, dtype=np.complex128)
    t_even = np.asarray(t_even, dtype=np.complex128)
    if t_odd.ndim == 2:
        _check_hopping(t_odd)
        _check_hopping(t_even)
    return -np.matmul(dagger_inv(t_odd), t_even)


def sector_maps(ts: np.ndarray, first_site: int, which: str) -> np.ndarray:
    """Sector maps from consecutive hopping blocks starting at ``first_site``.

    ``which='odd'`` pairs (T_{2x}, T_{2x+1}) and propagates odd sites;
    ``which='even'`` pairs (T_{2x+1}, T_{2x+2}) and propagates even sites.
    The first block of each pair is the un-inverted factor.
    """
    want = 0 if which == "odd" else 1
    off = (want - first_site) % 2
    usable = (ts.shape[0] - off) // 2
    first = ts[off:off + 2 * usable:2]
    second = ts[off + 1:off + 2 * usable:2]
    return zero_energy_sector_step(second, first)


class ProductAccumulator:
    """Running QR-deflated product ``A_n ... A_1 @ frame``.

    Holds an orthonormal frame (stack-aware: leading batch axes allowed) and
    the running sums of log |R_ii|.  The product itself is never formed.
    """

    def __init__(self, dim: int, k: Optional[int] = None, batch: tuple = (),
                 reorth_period: Optional[int] = None, frame: Optional[np.ndarray] = None):
        k = dim if k is None else k
        if frame is None:
            frame = np.broadcast_to(np.eye(dim, k, dtype=np.complex128), tuple(batch) + (dim, k)).copy()
        self.frame = np.array(frame, dtype=np.complex128)
        self.dim = dim
        self.k = self.frame.shape[-1]
        self.log_sums = np.zeros(self.frame.shape[:-2] + (self.k,))
        self.step_count = 0
        self.reorth_period = reorth_period or (1 if dim <= 8 else 5)
        self._pending = 0

    def deflate(self) -> None:
        if self._pending == 0:
            return
        q, r = np.linalg.qr(self.frame)
        d = np.diagonal(r, axis1=-2, axis2=-1)
        mag = np.abs(d)
        if np.any(mag < TINY):
            raise RankDeficient("propagated frame degenerated")
        self.frame = q * (d / mag)[..., None, :]
        self.log_sums += np.log(mag)
        self._pending = 0

    def push(self, a) -> "ProductAccumulator":
        a = np.asarray(a)
        self.frame = np.matmul(a, self.frame)
        self.step_count += 1
        self._pending += 1
        if self._pending >= self.reorth_period:
            self.deflate()
        elif np.abs(self.frame).max() > OVERFLOW_GUARD:
            self.deflate()
        return self

    def push_many(self, maps) -> "ProductAccumulator":
        """Apply ``maps[0]``, then ``maps[1]``, ...; ``maps`` has a leading step axis."""
        maps = np.asarray(maps)
        if self.dim == 1 and self.k == 1:
            # 1x1 frames: deflation is |product|, accumulate exactly
            m = maps.reshape(maps.shape[0], *self.frame.shape[:-2])
            mag = np.abs(m)
            if np.any(mag < TINY):
                raise RankDeficient("zero scalar transfer map")
            self.log_sums += np.log(mag).sum(axis=0)[..., None]
            phase = np.prod(m / mag, axis=0)
            self.frame = self.frame * phase[..., None, None]
            self.step_count += maps.shape[0]
            return self
        for a in maps:
            self.push(a)
        return self

    def exponents(self) -> np.ndarray:
        self.deflate()
        return self.log_sums / max(self.step_count, 1)


def propagate(acc: ProductAccumulator, a) -> ProductAccumulator:
    """Push one transfer matrix (``TransferMatrix`` or array) onto ``acc``."""
    m = a.matrix if isinstance(a, TransferMatrix) else a
    if np.shape(m)[-1] != acc.dim:
        raise ValueError(f"dimension mismatch: map {np.shape(m)}, frame {acc.dim}")
    return acc.push(m)


def explicit_product(r: Realization, z: complex, n: int, m: int) -> np.ndarray:
    """B_{n,m}(z) = A_n(z) ... A_m(z); identity when n < m.  Short windows only."""
    if n - m + 1 > 20:
        raise ValueError("explicit products are limited to 20 factors")
    dim = 2 * r.n_internal
    b = np.eye(dim, dtype=np.complex128)
    for site in range(m, n + 1):
        v = None if r.onsite is None else r.v(site)
        b = transfer_blocks(r.t(site), z, v) @ b
    return b


def recursion_solution(r: Realization, z: complex, psi_first, psi_second) -> np.ndarray:
    """Matrix solution of (H - z) psi = 0 on the realization window.

    ``psi_first``, ``psi_second`` are the values at sites a and a+1 (N x l);
    returns an array of shape (len(r), N, l) indexed by ``site - a``.  The
    equation is imposed at sites a+1 .. b-1.
    """
    a, b = r.window
    p0 = np.atleast_2d(np.asarray(psi_first, dtype=np.complex128))
    p1 = np.atleast_2d(np.asarray(psi_second, dtype=np.complex128))
    if p0.shape[0] != r.n_internal:
        p0, p1 = p0.T, p1.T
    out = np.zeros((len(r),) + p0.shape, dtype=np.complex128)
    out[0] = p0
    if len(r) > 1:
        out[1] = p1
    for site in range(a + 1, b):
        s = site - a
        rhs = z * out[s] - r.t(site) @ out[s - 1] - r.v(site) @ out[s]
        out[s + 1] = np.linalg.solve(r.t(site + 1).conj().T, rhs)
    return out


@dataclass(frozen=True, eq=False)
class WronskianValue:
    value: np.ndarray
    site: int


def wronskian(phi_row, psi_col, r: Realization, n: int) -> WronskianValue:
    """C_n(phi, psi) = phi_n T_{n+1}^* psi_{n+1} - phi_{n+1} T_{n+1} psi_n.

    ``phi_row`` has shape (len(r), l', N) (row solutions), ``psi_col`` has
    shape (len(r), N, l); both are indexed by ``site - a``.
    """
    a, b = r.window
    if not a <= n < b:
        raise WindowMismatch(f"site {n} needs n and n+1 inside {r.window}")
    phi = np.asarray(phi_row, dtype=np.complex128)
    psi = np.asarray(psi_col, dtype=np.complex128)
    if phi.shape[0] != len(r) or psi.shape[0] != len(r):
        raise WindowMismatch("solutions do not cover the realization window")
    if phi.ndim == 2:
        phi = phi[:, None, :]
    if psi.ndim == 2:
        psi = psi[:, :, None]
    s = n - a
    t = r.t(n + 1)
    value = phi[s] @ t.conj().T @ psi[s + 1] - phi[s + 1] @ t @ psi[s]
    return WronskianValue(value, n)
