"""Exponential decay fits shared by the FM, Combes-Thomas and Fermi diagnostics."""
from __future__ import annotations

from dataclasses import asdict, dataclass
from typing import Optional

import numpy as np
from sklearn.base import BaseEstimator, RegressorMixin
from sklearn.utils.validation import check_is_fitted, check_X_y, column_or_1d

from .exceptions import DegenerateFit


@dataclass(frozen=True)
class DecayFit:
    slope: float
    intercept: float
    r_squared: float
    window: tuple[float, float]
    slope_stderr: float = float("nan")
    n_points: int = 0
    label: str = ""

    @property
    def rate(self) -> float:
        """Decay rate, ``-slope``."""
        return -self.slope

    def as_dict(self) -> dict:
        d = asdict(self)
        d["window"] = list(self.window)
        d["rate"] = self.rate
        return d


def fit_exponential(xs, ys, window: Optional[tuple[float, float]] = None, label: str = "") -> DecayFit:
    """Least squares of log(y) against x over ``window`` (inclusive)."""
    x = np.asarray(xs, dtype=float)
    y = np.asarray(ys, dtype=float)
    if x.shape != y.shape:
        raise ValueError("xs and ys differ in shape")
    if window is None:
        window = (float(x.min()), float(x.max())) if x.size else (0.0, 0.0)
    sel = (x >= window[0]) & (x <= window[1])
    x, y = x[sel], y[sel]
    if x.size < 3 or np.ptp(x) == 0:
        raise DegenerateFit(f"{x.size} point(s) in window {window}")
    if np.any(y <= 0) or not np.all(np.isfinite(y)):
        raise ValueError("ys must be positive and finite")
    ly = np.log(y)
    xm, ym = x.mean(), ly.mean()
    sxx = float(np.sum((x - xm) ** 2))
    slope = float(np.sum((x - xm) * (ly - ym)) / sxx)
    intercept = float(ym - slope * xm)
    resid = ly - (intercept + slope * x)
    ss_res = float(np.sum(resid ** 2))
    ss_tot = float(np.sum((ly - ym) ** 2))
    r2 = 1.0 if ss_tot <= 1e-30 * max(1.0, ym ** 2) else max(0.0, 1.0 - ss_res / ss_tot)
    se = float(np.sqrt(ss_res / (x.size - 2) / sxx)) if x.size > 2 else float("nan")
    return DecayFit(slope, intercept, r2, (float(window[0]), float(window[1])), se, int(x.size), label)


class ExponentialDecay(RegressorMixin, BaseEstimator):
    """Regressor form of :func:`fit_exponential`: y ~ exp(intercept + slope * x).

    Parameters
    ----------
    window : tuple or None
        Inclusive x-range used for the fit; ``None`` uses all points.
    """

    def __init__(self, window=None):
        self.window = window

    def fit(self, X, y):
        X, y = check_X_y(np.asarray(X, dtype=float).reshape(-1, 1), y)
        self.fit_ = fit_exponential(X[:, 0], y, self.window)
        self.slope_ = self.fit_.slope
        self.intercept_ = self.fit_.intercept
        self.rate_ = self.fit_.rate
        return self

    def predict(self, X):
        check_is_fitted(self, "fit_")
        x = column_or_1d(np.asarray(X, dtype=float).reshape(-1))
        return np.exp(self.intercept_ + self.slope_ * x)

    def score(self, X, y, sample_weight=None):
        """R^2 in log space, the quantity reported by the fit."""
        check_is_fitted(self, "fit_")
        ly = np.log(np.asarray(y, dtype=float))
        pred = self.intercept_ + self.slope_ * np.asarray(X, dtype=float).reshape(-1)
        ss_tot = np.sum((ly - ly.mean()) ** 2)
        return 1.0 - np.sum((ly - pred) ** 2) / ss_tot if ss_tot > 0 else 1.0
