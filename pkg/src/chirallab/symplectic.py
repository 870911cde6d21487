"""The Hermitian symplectic group Sp*_2N(C) = {M : M^* J M = J}.

Includes the (D, R, S) coordinate chart on the open set where the lower
right block D is invertible:

    M = [[A, B], [C, D]],   B = R D,   C = D S,   A = D°(1 + B^* C)

with R, S Hermitian and D° = (D^*)^{-1}.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np

from .exceptions import (ChartAsymmetric, ChartDegenerate, DBlockSingular, NotSymplectic,
                         OddDimension, SingularHopping)
from .linalg import as_cmatrix, dagger_inv, opnorm


def j_matrix(n: int) -> np.ndarray:
    """[[0, -1_N], [1_N, 0]], built exactly."""
    j = np.zeros((2 * n, 2 * n), dtype=np.complex128)
    j[:n, n:] = -np.eye(n)
    j[n:, :n] = np.eye(n)
    return j


class Membership(NamedTuple):
    member: bool
    residual: float


def is_symplectic(m, tol: float = 1e-10) -> Membership:
    """Check ``||M^* J M - J||_max <= tol * max(1, ||M||^2)``."""
    a = as_cmatrix(m)
    if a.shape[0] != a.shape[1] or a.shape[0] % 2:
        raise OddDimension(f"need a square matrix of even order, got {a.shape}")
    j = j_matrix(a.shape[0] // 2)
    residual = float(np.abs(a.conj().T @ j @ a - j).max())
    return Membership(residual <= tol * max(1.0, opnorm(a) ** 2), residual)


def _split(m: np.ndarray):
    n = m.shape[0] // 2
    return m[:n, :n], m[:n, n:], m[n:, :n], m[n:, n:]


def _check_invertible(d: np.ndarray, exc, what: str, cond_limit: float = 1e12):
    sv = np.linalg.svd(d, compute_uv=False)
    if sv[-1] == 0 or sv[0] / sv[-1] > cond_limit:
        raise exc(f"{what} is numerically singular (condition {sv[0] / max(sv[-1], 1e-300):.3e})")


@dataclass(frozen=True, eq=False)
class DRSChart:
    d: np.ndarray
    r: np.ndarray
    s: np.ndarray
    asymmetry: float = 0.0  # Hermitian defect removed when the chart was extracted

    def __post_init__(self):
        for name in ("d", "r", "s"):
            object.__setattr__(self, name, as_cmatrix(getattr(self, name), name))

    @property
    def n(self) -> int:
        return self.d.shape[0]


def matrix_from_chart(c: DRSChart) -> np.ndarray:
    _check_invertible(c.d, ChartDegenerate, "chart D")
    b = c.r @ c.d
    cc = c.d @ c.s
    a = dagger_inv(c.d) @ (np.eye(c.n) + b.conj().T @ cc)
    return np.block([[a, b], [cc, c.d]])


def _hermitian_part(x: np.ndarray) -> tuple[np.ndarray, float]:
    defect = float(np.abs(x - x.conj().T).max()) / max(float(np.abs(x).max()), 1e-300)
    return 0.5 * (x + x.conj().T), defect


def chart_from_matrix(m, max_asymmetry: Optional[float] = None) -> DRSChart:
    """Extract (D, R, S) from a symplectic matrix with invertible D block.

    R and S are symmetrized and the relative asymmetry removed is stored on the
    chart.  With ``max_asymmetry`` set, a larger defect raises instead.
    """
    a = as_cmatrix(m)
    ok, residual = is_symplectic(a, 1e-8)
    if not ok:
        raise NotSymplectic(f"symplectic residual {residual:.3e}")
    _, b, c, d = _split(a)
    _check_invertible(d, DBlockSingular, "D block")
    r, ar = _hermitian_part(np.linalg.solve(d.T, b.T).T)  # B D^-1
    s, as_ = _hermitian_part(np.linalg.solve(d, c))       # D^-1 C
    asym = max(ar, as_)
    if max_asymmetry is not None and asym > max_asymmetry:
        raise ChartAsymmetric(f"chart asymmetry {asym:.3e} above {max_asymmetry:.1e}")
    return DRSChart(d.copy(), r, s, asym)


def _invertible_hopping(t, name="T") -> np.ndarray:
    t = as_cmatrix(t, name)
    if t.shape[0] != t.shape[1]:
        raise ValueError(f"{name} must be square")
    sv = np.linalg.svd(t, compute_uv=False)
    if sv[-1] <= 1e-14 * max(sv[0], 1e-300):
        raise SingularHopping(f"{name} is singular")
    return t


def product_chart_two(t1, t2, lam: float) -> DRSChart:
    """Chart of A(T1, lam) A(T2, lam): (D, R, S) = (-T1° T2, lam, -lam (T2^* T2)^-1)."""
    if lam == 0:
        raise ValueError("lambda must be non-zero")
    t1 = _invertible_hopping(t1, "t1")
    t2 = _invertible_hopping(t2, "t2")
    n = t1.shape[0]
    d = -dagger_inv(t1) @ t2
    s = -lam * np.linalg.inv(t2.conj().T @ t2)
    return DRSChart(d, lam * np.eye(n), 0.5 * (s + s.conj().T))


def product_chart_three(t, c: DRSChart, lam: float) -> DRSChart:
    """Chart of A(T, lam) M' for M' = (D, lam*1, S) in the R = lam slice.

    D~ = lam T° D,  R~ = lam - |T^*|^2 / lam,  S~ = S + |D|^-2 / lam.
    """
    if lam == 0:
        raise ValueError("lambda must be non-zero")
    t = _invertible_hopping(t)
    n = t.shape[0]
    if np.abs(c.r - lam * np.eye(n)).max() > 1e-10 * max(1.0, abs(lam)):
        raise ValueError("product_chart_three needs a chart with R = lambda * 1")
    _check_invertible(c.d, ChartDegenerate, "chart D")
    d = lam * dagger_inv(t) @ c.d
    r = lam * np.eye(n) - (t @ t.conj().T) / lam
    s = c.s + np.linalg.inv(c.d.conj().T @ c.d) / lam
    return DRSChart(d, 0.5 * (r + r.conj().T), 0.5 * (s + s.conj().T))


@dataclass(frozen=True)
class SymmetryReport:
    eigenvalue_defect: float
    singular_defect: float
    eigenvalue_moduli: np.ndarray
    singular_values: np.ndarray

    @property
    def defect(self) -> float:
        return max(self.eigenvalue_defect, self.singular_defect)


def _pairing_defect(values: np.ndarray) -> float:
    v = np.sort(np.asarray(values, dtype=float))[::-1]
    return float(np.abs(v * v[::-1] - 1.0).max())


def spectral_symmetry_check(m) -> SymmetryReport:
    """Pair eigenvalue moduli as (r, 1/r) and singular values as (sigma, 1/sigma)."""
    a = as_cmatrix(m)
    if a.shape[0] % 2:
        raise OddDimension("odd order")
    moduli = np.sort(np.abs(np.linalg.eigvals(a)))[::-1]
    sv = np.linalg.svd(a, compute_uv=False)
    return SymmetryReport(_pairing_defect(moduli), _pairing_defect(sv), moduli, sv)
