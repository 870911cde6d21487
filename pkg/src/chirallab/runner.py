"""Experiment dispatch, artifact writing and the sqrt(W) sweep.

Every file written by :func:`run` starts with ``# config_hash: ...`` and
contains nothing that depends on timing or thread count, so a rerun of the
same configuration reproduces it byte for byte.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from . import greens, lyapunov
from .config import ExperimentConfig
from .exceptions import LabError, NumericalFailure
from .fitting import fit_exponential
from .linalg import opnorm
from .model import (Ginibre, ModelConfig, assemble_hamiltonian, bloch_infimum, bloch_spectrum, periodic_gap_bound,
                    sample_realization)
from .records import write_csv, write_json
from .symplectic import (chart_from_matrix, is_symplectic, matrix_from_chart, product_chart_three,
                         product_chart_two, spectral_symmetry_check)
from .transfer import transfer_blocks


@dataclass
class RunResult:
    experiment: str
    config_echo: str
    config_hash: str
    wall_time: float = 0.0
    summary: dict = field(default_factory=dict)
    warnings: list = field(default_factory=list)
    files: list = field(default_factory=list)


class _Context:
    def __init__(self, cfg: ExperimentConfig):
        self.cfg = cfg
        self.model = cfg.model
        self.p = cfg.params
        self.out = cfg.output_dir
        self.meta = {"config_hash": cfg.hash, "experiment": cfg.experiment, "seed": cfg.model.seed}
        self.files: list[Path] = []
        self.warnings: list[str] = []

    def csv(self, name, columns, rows):
        self.files.append(write_csv(self.out / name, columns, rows, self.meta))

    def json(self, name, payload):
        self.files.append(write_json(self.out / name, payload, self.meta))


def _resample_warning(ctx: _Context, count: int) -> None:
    if count:
        ctx.warnings.append(f"{count} hopping blocks were resampled (smallest singular value below threshold)")


# --------------------------------------------------------------------------
# experiments
# --------------------------------------------------------------------------

def _lyapunov(ctx: _Context) -> dict:
    p = ctx.p
    ests = lyapunov.spectrum_vs_energy(ctx.model, p["energies"], p["steps"], p["realizations"],
                                       burn_in=p["burn_in"], threads=ctx.cfg.threads, group=p["group"],
                                       gap_test=p["gap_test"])
    ctx.csv("lyapunov.csv", lyapunov.SPECTRUM_COLUMNS, lyapunov.spectrum_rows(ests))
    _resample_warning(ctx, sum(e.resample_count for e in ests))
    rows = [{"z": e.z, "gammas": e.gammas, "std_errors": e.std_errors,
             "antisymmetry_defect": e.antisymmetry_defect(), "antisymmetry_ok": e.antisymmetry_ok(),
             "zero_sum": e.zero_sum(), "zero_sum_ok": e.zero_sum_ok(), "simple": e.is_simple()}
            for e in ests]
    summary = {"energies": rows}
    ctx.json("summary.json", summary)
    return summary


def _both_ginibre(model: ModelConfig) -> bool:
    return isinstance(model.alpha0, Ginibre) and isinstance(model.alpha1, Ginibre)


def _sector_summary(model: ModelConfig, spec, k_sigma: float) -> dict:
    out = {"xis_plus": spec.xis_plus, "xis_minus": spec.xis_minus,
           "std_errors_plus": spec.std_errors_plus, "std_errors_minus": spec.std_errors_minus,
           "localized_at_zero": lyapunov.localized_at_zero(spec, k_sigma).value}
    if _both_ginibre(model):
        s0, s1, n = model.alpha0.sigma, model.alpha1.sigma, model.n_internal
        exact = lyapunov.ginibre_sector_exact(s0, s1, n)
        out["ginibre_exact_plus"] = exact.xis_plus
        out["ginibre_exact_minus"] = exact.xis_minus
        out["degenerate_value"] = float(np.log(s0 / s1))
        out["max_dev_from_exact"] = float(max(np.abs(spec.xis_plus - exact.xis_plus).max(),
                                              np.abs(spec.xis_minus - exact.xis_minus).max()))
        out["max_dev_from_degenerate"] = float(max(np.abs(spec.xis_plus - np.log(s0 / s1)).max(),
                                                   np.abs(spec.xis_minus + np.log(s0 / s1)).max()))
    return out


def _sector_zero(ctx: _Context) -> dict:
    p = ctx.p
    spec = lyapunov.sector_spectrum_zero(ctx.model, p["steps"], p["realizations"], burn_in=p["burn_in"],
                                         threads=ctx.cfg.threads, group=p["group"])
    ctx.csv("sector.csv", lyapunov.SPECTRUM_COLUMNS + ("sector",), lyapunov.sector_rows(spec))
    summary = _sector_summary(ctx.model, spec, p["k_sigma"])
    ctx.json("summary.json", summary)
    return summary


def _fm_decay(ctx: _Context) -> dict:
    p = ctx.p
    window = None
    if p["fit_min"] is not None or p["fit_max"] is not None:
        lo, hi = greens.default_fit_window(p["window_len"] - 1)
        window = (lo if p["fit_min"] is None else p["fit_min"], hi if p["fit_max"] is None else p["fit_max"])
    fm = greens.fm_estimate(ctx.model, p["lam"], p["eta"], p["s"], p["window_len"], p["realizations"],
                            fit_window=window, bootstrap=p["bootstrap"], threads=ctx.cfg.threads)
    greens.write_fm(fm, ctx.out, ctx.meta)
    ctx.files += [ctx.out / "fm_decay.csv", ctx.out / "fit.json"]
    if fm.rejected:
        ctx.warnings.append(f"{fm.rejected} realizations rejected with lambda in the spectrum")
    h = assemble_hamiltonian(sample_realization(ctx.model, (1, p["window_len"]), 0))
    try:
        table = greens.greens_finite(h, complex(p["lam"], p["eta"]),
                                     [(x, 1) for x in range(1, p["window_len"] + 1)])
        ctx.files.append(greens.dump_greens_csv(table, ctx.out / "greens_dump.csv", ctx.meta))
    except NumericalFailure as exc:
        ctx.warnings.append(f"greens_dump.csv skipped: {exc}")
    summary = {**fm.fit_record(), "rejected": fm.rejected, "realizations": fm.realizations,
               "mu_positive": bool(fm.mu > 3 * fm.band)}
    if p["typical_n"]:
        med, vals = greens.typical_decay(ctx.model, p["lam"], p["typical_n"], p["realizations"], ctx.cfg.threads)
        ctx.csv("typical.csv", ("realization", "minus_log_norm_over_n"), enumerate(vals))
        summary["typical_median"] = med
        summary["typical_n"] = p["typical_n"]
    return summary


def _apriori(ctx: _Context) -> dict:
    p = ctx.p
    rows = greens.apriori_scan(ctx.model, p["z_list"], p["s"], p["realizations"], p["window_len"],
                               ctx.cfg.threads)
    ctx.csv("apriori.csv", ("z_re", "z_im", "one_step_mean", "one_step_stderr", "diagonal_mean",
                            "diagonal_stderr", "flagged"),
            [(r.z.real, r.z.imag, r.one_step_mean, r.one_step_stderr, r.diagonal_mean, r.diagonal_stderr,
              r.flagged) for r in rows])
    means = np.array([r.one_step_mean for r in rows])
    med = float(np.median(means))
    summary = {"median_one_step": med, "spread_factor": float(max(means.max() / med, med / means.min())),
               "flagged": sum(r.flagged for r in rows)}
    ctx.json("summary.json", summary)
    return summary


def _combes_thomas(ctx: _Context) -> dict:
    p = ctx.p
    scan = greens.combes_thomas_scan(ctx.model, p["energy"], p["etas"], p["s"], p["window_len"],
                                     p["realizations"], ctx.cfg.threads, bootstrap=p["bootstrap"])
    ctx.csv("combes_thomas.csv", ("eta", "mu", "band", "r2", "mu_over_eta"),
            [(eta, e.mu, e.band, e.fit.r_squared, ratio)
             for eta, e, ratio in zip(scan.etas, scan.estimates, scan.ratios)])
    summary = {"etas": scan.etas, "mus": scan.mus, "bands": scan.bands, "monotone": scan.monotone}
    ctx.json("summary.json", summary)
    return summary


def _zero_energy_check(ctx: _Context) -> dict:
    """Closed form against dense inversion on [1, 2n], and kernel dimensions on [1, 2n] and [1, 2n+1].

    ``closed_form_dev`` is the largest entry of |closed form - inv(H)|
    divided by scale = 1 + ||H||; ``relative_dev`` divides by the largest
    entry of the closed form instead (diagnostic only, since the dense
    inverse loses about eps * ||H|| * ||G||^2 in absolute terms).
    """
    p = ctx.p
    n = ctx.model.n_internal
    rows = []
    for idx in range(p["seeds"]):
        for half in p["half_lengths"]:
            r = sample_realization(ctx.model, (1, 2 * half + 1), idx)
            h_even = assemble_hamiltonian(r, (1, 2 * half))
            h_odd = assemble_hamiltonian(r)
            scale = 1.0 + opnorm(h_even.matrix)
            inv = np.linalg.inv(h_even.matrix)
            cf = greens.greens_zero_closed_form_matrix(replace(r, window=(1, 2 * half), hopping=r.hopping[:-1]))
            same = (np.add.outer(np.repeat(np.arange(2 * half), n), np.repeat(np.arange(2 * half), n)) % 2) == 0
            dev = float(np.abs(cf - inv).max())
            rows.append((idx, half, dev / scale, dev / float(np.abs(cf).max()),
                         float(np.abs(inv[same]).max()) / scale, float(np.abs(cf).max()),
                         greens.kernel_dim(h_even), greens.kernel_dim(h_odd), not np.any(cf[same])))
    ctx.csv("zero_energy.csv", ("realization", "half_length", "closed_form_dev", "relative_dev", "same_parity_max",
                                "max_abs_g", "ker_even", "ker_odd", "closed_form_zero"), rows)
    summary = {"closed_form_max_dev": max(r[2] for r in rows),
               "relative_max_dev": max(r[3] for r in rows),
               "same_parity_max": max(r[4] for r in rows),
               "max_abs_g": max(r[5] for r in rows),
               "kernel_ok": all(r[6] == 0 and r[7] == n for r in rows),
               "closed_form_same_parity_exact_zero": all(r[8] for r in rows)}
    ctx.json("summary.json", summary)
    return summary


def _chart_check(ctx: _Context) -> dict:
    lam = ctx.p["lam"]
    rows = []
    for idx in range(ctx.p["samples"]):
        r = sample_realization(ctx.model, (1, 3), idx)
        t1, t2, t3 = r.t(1), r.t(2), r.t(3)
        prod2 = transfer_blocks(t1, lam) @ transfer_blocks(t2, lam)
        prod3 = transfer_blocks(t3, lam) @ prod2
        c2 = product_chart_two(t1, t2, lam)
        two = float(np.abs(matrix_from_chart(c2) - prod2).max() / max(1.0, opnorm(prod2)))
        three = float(np.abs(matrix_from_chart(product_chart_three(t3, c2, lam)) - prod3).max()
                      / max(1.0, opnorm(prod3)))
        round_trip = float(np.abs(matrix_from_chart(chart_from_matrix(prod3)) - prod3).max()
                           / max(1.0, opnorm(prod3)))
        residual = is_symplectic(prod3).residual / max(1.0, opnorm(prod3) ** 2)
        pairing = spectral_symmetry_check(prod3).singular_defect
        rows.append((idx, residual, round_trip, two, three, pairing))
    ctx.csv("chart_check.csv", ("sample", "symplectic_residual", "round_trip", "chart_two", "chart_three",
                                "sv_pairing"), rows)
    arr = np.array([r[1:] for r in rows])
    summary = {"max_symplectic_residual": float(arr[:, 0].max()), "max_round_trip": float(arr[:, 1].max()),
               "max_chart_two": float(arr[:, 2].max()), "max_chart_three": float(arr[:, 3].max()),
               "max_chart_defect": float(arr[:, 1:4].max()), "max_sv_pairing": float(arr[:, 4].max())}
    ctx.json("summary.json", summary)
    return summary


def _bloch(ctx: _Context) -> dict:
    p = ctx.p
    rows = []
    for idx in range(p["samples"]):
        r = sample_realization(ctx.model, (0, 1), idx)
        a, b = r.t(0), r.t(1)
        inf_h2 = bloch_infimum(a, b, p["k_grid"]) ** 2
        bound = periodic_gap_bound(a, b)
        rows.append((idx, inf_h2, bound, inf_h2 <= bound + 1e-8))
    ctx.csv("bloch.csv", ("sample", "inf_h_squared", "gap_bound", "holds"), rows)
    eye = np.eye(ctx.model.n_internal)
    free = [(k, bloch_spectrum(eye, eye, k).gap) for k in p["refinements"]]
    ctx.csv("bloch_free.csv", ("k_grid", "grid_min"), free)
    violations = [r for r in rows if not r[3]]
    summary = {"samples": len(rows), "violations": len(violations),
               "max_excess": float(max((r[1] - r[2] for r in rows), default=0.0)),
               "free_chain_grid_min": [g for _, g in free]}
    if violations:
        ctx.warnings.append(f"gap bound exceeded in {len(violations)} of {len(rows)} samples")
    ctx.json("summary.json", summary)
    return summary


def _fermi(ctx: _Context) -> dict:
    p = ctx.p
    window = (p["window_start"], p["window_end"])
    h = assemble_hamiltonian(sample_realization(ctx.model, window, p["realization_index"]))
    fd = greens.fermi_projection_decay(h, p["fermi_energy"])
    ctx.csv("fermi.csv", ("distance", "norm"), zip(fd.distances, fd.norms))
    summary = {"row": fd.row, "mu": fd.fit.rate, "intercept": fd.fit.intercept, "r2": fd.fit.r_squared,
               "band": fd.band, "fit_window": list(fd.fit.window), "idempotency_defect": fd.idempotency_defect,
               "chiral_defect": fd.chiral_defect, "kernel_dim": fd.kernel_dim}
    ctx.json("fit.json", summary)
    return summary


def _convergence(ctx: _Context) -> dict:
    p = ctx.p
    scan = greens.resolvent_convergence_scan(ctx.model, p["z"], p["window_lens"], p["realization_index"])
    diffs = [float("nan")] + list(scan.differences)
    ctx.csv("convergence.csv", ("window_len", "g00_trace_norm", "difference"),
            [(w, float(greens.trace_norm(v)), d) for w, v, d in zip(scan.window_lens, scan.values, diffs)])
    summary = {"differences": scan.differences, "cauchy_monotone": scan.cauchy_monotone}
    ctx.json("summary.json", summary)
    return summary


@dataclass(frozen=True, eq=False)
class SqrtWTable:
    w: np.ndarray
    min_xi: np.ndarray
    min_xi_stderr: np.ndarray
    exact_min_xi: np.ndarray
    spectra: list
    slope: float

    @property
    def w_times_min(self) -> np.ndarray:
        return self.w * self.min_xi


def sqrt_w_sweep(model: ModelConfig, w_list: Sequence[int], steps: int = 100_000, realizations: int = 8,
                 burn_in: Optional[int] = None, threads=1, group: int = 4) -> SqrtWTable:
    """Sector-zero spectra for N = W with sigma0 = exp(-1/W), sigma1 = exp(-2/W).

    Only the seed and resample thresholds of ``model`` are used.  The slope
    is the least-squares slope of log min_j |xi_j| against log W (NaN for
    fewer than three widths).
    """
    ws = np.array(sorted(int(w) for w in w_list))
    if ws.size == 0:
        raise ValueError("w_list is empty")
    mins, errs, exact, spectra = [], [], [], []
    thr0 = getattr(model.alpha0, "resample_threshold", 1e-8)
    thr1 = getattr(model.alpha1, "resample_threshold", 1e-8)
    for w in ws:
        s0, s1 = np.exp(-1.0 / w), np.exp(-2.0 / w)
        cfg = ModelConfig(int(w), Ginibre(s0, thr0), Ginibre(s1, thr1), None, model.seed)
        spec = lyapunov.sector_spectrum_zero(cfg, steps, realizations, burn_in, threads, group)
        j = int(np.argmin(np.abs(spec.xis_plus)))
        mins.append(abs(spec.xis_plus[j]))
        errs.append(spec.std_errors_plus[j])
        exact.append(float(np.abs(lyapunov.ginibre_sector_exact(s0, s1, int(w)).xis_plus).min()))
        spectra.append(spec)
    mins = np.array(mins)
    slope = float("nan")
    if ws.size >= 3 and np.all(mins > 0):
        slope = fit_exponential(np.log(ws), mins).slope
    return SqrtWTable(ws, mins, np.array(errs), np.array(exact), spectra, slope)


def _sqrt_w(ctx: _Context) -> dict:
    p = ctx.p
    table = sqrt_w_sweep(ctx.model, p["w_list"], p["steps"], p["realizations"], p["burn_in"],
                         ctx.cfg.threads, p["group"])
    ctx.csv("sqrt_w.csv", ("w", "min_xi", "stderr", "w_times_min_xi", "exact_min_xi"),
            zip(table.w, table.min_xi, table.min_xi_stderr, table.w_times_min, table.exact_min_xi))
    summary = {"w": table.w, "w_times_min_xi": table.w_times_min, "stderr": table.min_xi_stderr,
               "slope": table.slope, "exact_min_xi": table.exact_min_xi,
               "within_3se_of_one": [bool(abs(v - 1) <= 3 * w * e)
                                     for v, w, e in zip(table.w_times_min, table.w, table.min_xi_stderr)]}
    ctx.json("summary.json", summary)
    return summary


_DISPATCH = {
    "lyapunov": _lyapunov, "sector-zero": _sector_zero, "fm-decay": _fm_decay, "apriori": _apriori,
    "combes-thomas": _combes_thomas, "zero-energy-check": _zero_energy_check, "chart-check": _chart_check,
    "bloch": _bloch, "fermi": _fermi, "convergence": _convergence, "sqrt-w-sweep": _sqrt_w,
}


def run(config: ExperimentConfig) -> RunResult:
    """Run one experiment and write its artifacts under ``config.output_dir``.

    Numerical failures propagate with the experiment name prepended.
    """
    ctx = _Context(config)
    start = time.perf_counter()
    try:
        summary = _DISPATCH[config.experiment](ctx)
    except LabError as exc:
        exc.args = (f"{config.experiment}: {exc}",) + exc.args[1:]
        raise
    echo = config.echo()
    out = config.output_dir / "config_echo.ini"
    out.parent.mkdir(parents=True, exist_ok=True)
    out.write_text(f"# config_hash: {config.hash}\n" + echo)
    ctx.files.append(out)
    return RunResult(config.experiment, echo, config.hash, time.perf_counter() - start, summary,
                     ctx.warnings, sorted({str(f) for f in ctx.files}))
