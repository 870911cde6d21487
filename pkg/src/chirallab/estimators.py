"""Estimator-style wrappers around the Lyapunov and fractional-moment routines.

Hyperparameters go to the constructor, ``fit`` takes the model and stores
results in trailing-underscore attributes.  The plain functions in
:mod:`chirallab.lyapunov` and :mod:`chirallab.greens` stay the primary API;
these classes add ``get_params``/``set_params``/``clone`` support for sweeps.
"""
from __future__ import annotations

from sklearn.base import BaseEstimator

from .fitting import ExponentialDecay
from .greens import fm_estimate
from .lyapunov import estimate_spectrum, localized_at_zero, sector_spectrum_zero
from .model import ModelConfig

__all__ = ["LyapunovSpectrum", "SectorSpectrumEstimator", "FractionalMomentDecay", "ExponentialDecay"]


class LyapunovSpectrum(BaseEstimator):
    """Full 2N spectrum at energy ``z``; ``fit(config)`` sets ``gammas_`` and ``std_errors_``."""

    def __init__(self, z=0.0, steps=100_000, realizations=8, burn_in=None, group=2, threads=1):
        self.z = z
        self.steps = steps
        self.realizations = realizations
        self.burn_in = burn_in
        self.group = group
        self.threads = threads

    def fit(self, config: ModelConfig, y=None):
        est = estimate_spectrum(config, self.z, self.steps, self.realizations, burn_in=self.burn_in,
                                threads=self.threads, group=self.group)
        self.estimate_ = est
        self.gammas_ = est.gammas
        self.std_errors_ = est.std_errors
        return self


class SectorSpectrumEstimator(BaseEstimator):
    """Zero-energy sector exponents; ``fit(config)`` sets ``xis_plus_``, ``xis_minus_`` and ``verdict_``."""

    def __init__(self, steps=100_000, realizations=8, burn_in=None, group=4, threads=1, k_sigma=3.0):
        self.steps = steps
        self.realizations = realizations
        self.burn_in = burn_in
        self.group = group
        self.threads = threads
        self.k_sigma = k_sigma

    def fit(self, config: ModelConfig, y=None):
        spec = sector_spectrum_zero(config, self.steps, self.realizations, burn_in=self.burn_in,
                                    threads=self.threads, group=self.group)
        self.spectrum_ = spec
        self.xis_plus_ = spec.xis_plus
        self.xis_minus_ = spec.xis_minus
        self.verdict_ = localized_at_zero(spec, self.k_sigma)
        return self


class FractionalMomentDecay(BaseEstimator):
    """Decay rate of E ||G(x, y; lam + i eta)||^s; ``fit(config)`` sets ``mu_`` and ``band_``."""

    def __init__(self, lam=1.0, eta=0.0, s=0.5, window_len=64, n_realizations=200, fit_window=None,
                 bootstrap=200, threads=1):
        self.lam = lam
        self.eta = eta
        self.s = s
        self.window_len = window_len
        self.n_realizations = n_realizations
        self.fit_window = fit_window
        self.bootstrap = bootstrap
        self.threads = threads

    def fit(self, config: ModelConfig, y=None):
        fm = fm_estimate(config, self.lam, self.eta, self.s, self.window_len, self.n_realizations,
                         fit_window=self.fit_window, bootstrap=self.bootstrap, threads=self.threads)
        self.estimate_ = fm
        self.mu_ = fm.mu
        self.band_ = fm.band
        return self
