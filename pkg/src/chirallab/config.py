"""Experiment configuration files.

INI format read with :mod:`configparser`::

    [experiment]
    name = sector-zero
    output_dir = out
    threads = 1

    [model]
    n_internal = 8
    seed = 0

    [alpha0]
    kind = ginibre
    sigma = 0.8824969025845955

    [alpha1]
    kind = ginibre
    sigma = 0.7788007830714049

    [params]
    steps = 200000

Distribution kinds: ``ginibre`` (sigma), ``uniform`` (radius_min,
radius_max), ``fixed`` (matrix), ``shifted`` (matrix, sigma).  Matrices are
written row by row, rows separated by ``;`` and entries by spaces, entries
in Python complex syntax (``1``, ``0.5j``, ``1+2j``).  An optional
``[onsite]`` section with ``kind = gue`` and ``scale`` adds the Wegner term.
Every parameter has a default; :meth:`ExperimentConfig.echo` writes the
fully resolved configuration back out.
"""
from __future__ import annotations

import configparser
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Callable, Optional

import numpy as np

from .exceptions import ConfigInvalid
from .model import GUE, DiagonalComplexUniform, Fixed, Ginibre, ModelConfig, ShiftedGinibre
from .records import content_hash, fmt

EXPERIMENTS = ("lyapunov", "sector-zero", "fm-decay", "apriori", "combes-thomas", "zero-energy-check",
               "chart-check", "bloch", "fermi", "convergence", "sqrt-w-sweep")


# --------------------------------------------------------------------------
# value parsing
# --------------------------------------------------------------------------

def _int(text: str) -> int:
    return int(text)


def _float(text: str) -> float:
    v = float(text)
    if not np.isfinite(v):
        raise ValueError("not finite")
    return v


def _complex(text: str) -> complex:
    v = complex(text.replace(" ", ""))
    if not np.isfinite(v.real) or not np.isfinite(v.imag):
        raise ValueError("not finite")
    return v


def _bool(text: str) -> bool:
    t = text.strip().lower()
    if t in ("1", "true", "yes", "on"):
        return True
    if t in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _optional(parse: Callable) -> Callable:
    def inner(text: str):
        return None if text.strip().lower() in ("", "none", "auto") else parse(text)
    return inner


def _list(parse: Callable) -> Callable:
    def inner(text: str):
        items = [t for t in text.replace(",", " ").split() if t]
        if not items:
            raise ValueError("empty list")
        return tuple(parse(t) for t in items)
    return inner


def parse_matrix(text: str) -> np.ndarray:
    rows = [r.split() for r in text.split(";") if r.strip()]
    if not rows or any(len(r) != len(rows[0]) for r in rows):
        raise ValueError("ragged matrix")
    return np.array([[complex(v) for v in r] for r in rows], dtype=np.complex128)


def format_value(value) -> str:
    if value is None:
        return "none"
    if isinstance(value, tuple):
        return ", ".join(format_value(v) for v in value)
    if isinstance(value, complex):
        return repr(value) if value.imag else fmt(value.real)
    if isinstance(value, np.ndarray):
        return "; ".join(" ".join(format_value(complex(v)) for v in row) for row in value)
    return fmt(value)


# --------------------------------------------------------------------------
# per-experiment parameter schemas: name -> (parser, default)
# --------------------------------------------------------------------------

_COMMON_MC = {
    "steps": (_int, 100_000),
    "realizations": (_int, 8),
    "burn_in": (_optional(_int), None),
}

SCHEMAS: dict[str, dict[str, tuple[Callable, Any]]] = {
    "lyapunov": {**_COMMON_MC, "energies": (_list(_complex), (0j,)), "group": (_int, 2),
                 "gap_test": (_bool, False)},
    "sector-zero": {**_COMMON_MC, "group": (_int, 4), "k_sigma": (_float, 3.0)},
    "fm-decay": {"lam": (_float, 1.0), "eta": (_float, 0.0), "s": (_float, 0.5), "window_len": (_int, 64),
                 "realizations": (_int, 200), "fit_min": (_optional(_float), None),
                 "fit_max": (_optional(_float), None), "bootstrap": (_int, 200), "typical_n": (_int, 0)},
    "apriori": {"z_list": (_list(_complex), tuple(1j * 10.0 ** -k for k in range(1, 7))), "s": (_float, 0.5),
                "realizations": (_int, 500), "window_len": (_int, 64)},
    "combes-thomas": {"energy": (_float, 1.0), "etas": (_list(_float), (0.25, 0.5, 1.0, 2.0)),
                      "s": (_float, 0.5), "window_len": (_int, 64), "realizations": (_int, 100),
                      "bootstrap": (_int, 200)},
    "zero-energy-check": {"half_lengths": (_list(_int), (4,)), "seeds": (_int, 10)},
    "chart-check": {"samples": (_int, 1000), "lam": (_float, 0.7)},
    "bloch": {"samples": (_int, 1000), "k_grid": (_int, 512),
              "refinements": (_list(_int), (256, 1024, 4096))},
    "fermi": {"window_start": (_int, 0), "window_end": (_int, 127), "realization_index": (_int, 0),
              "fermi_energy": (_float, 0.0)},
    "convergence": {"z": (_complex, 1j), "window_lens": (_list(_int), (8, 16, 32, 64, 128)),
                    "realization_index": (_int, 0)},
    "sqrt-w-sweep": {**_COMMON_MC, "w_list": (_list(_int), (2, 4, 8)), "group": (_int, 4)},
}


def _validate_params(experiment: str, p: dict) -> None:
    def need(cond, msg):
        if not cond:
            raise ConfigInvalid(f"[params] {msg}")

    for key in ("steps", "realizations", "samples", "seeds", "window_len", "bootstrap", "k_grid", "group"):
        if key in p:
            need(p[key] >= (0 if key == "bootstrap" else 1), f"{key} must be positive")
    if "steps" in p:
        need(p["steps"] >= 1000 and p["steps"] % 2 == 0, "steps must be even and >= 1000")
    if "s" in p:
        need(0 < p["s"] < 1, "s must lie in (0, 1)")
    if experiment == "fm-decay":
        need(p["eta"] >= 0, "eta must be >= 0")
        need(p["window_len"] >= 16, "window_len must be >= 16")
        need(p["typical_n"] == 0 or p["typical_n"] >= 2, "typical_n must be 0 (off) or >= 2")
    if experiment == "combes-thomas":
        need(all(e > 0 for e in p["etas"]), "etas must be positive")
    if experiment == "apriori":
        need(p["window_len"] % 2 == 0, "window_len must be even")
        need(all(z != 0 for z in p["z_list"]), "z_list must avoid 0")
    if experiment == "zero-energy-check":
        need(all(n >= 1 for n in p["half_lengths"]), "half_lengths must be >= 1")
    if experiment == "chart-check":
        need(p["lam"] != 0, "lam must be non-zero")
    if experiment == "fermi":
        need(p["window_end"] > p["window_start"], "empty window")
    if experiment == "convergence":
        need(p["z"].imag != 0, "z needs a non-zero imaginary part")
        need(all(w >= 2 and w % 2 == 0 for w in p["window_lens"]), "window_lens must be even and >= 2")
    if experiment == "sqrt-w-sweep":
        need(all(w >= 1 for w in p["w_list"]), "w_list entries must be >= 1")


# --------------------------------------------------------------------------
# model section
# --------------------------------------------------------------------------

def _distribution(section: configparser.SectionProxy, name: str):
    kind = section.get("kind", "").strip().lower()
    thr = _float(section.get("resample_threshold", "1e-8"))
    if kind == "ginibre":
        return Ginibre(_float(section["sigma"]), thr)
    if kind == "uniform":
        return DiagonalComplexUniform(_float(section["radius_min"]), _float(section["radius_max"]), thr)
    if kind == "fixed":
        return Fixed(parse_matrix(section["matrix"]), thr)
    if kind == "shifted":
        return ShiftedGinibre(parse_matrix(section["matrix"]), _float(section["sigma"]), thr)
    raise ConfigInvalid(f"[{name}] unknown kind {kind!r}")


def _distribution_fields(d) -> dict:
    if isinstance(d, Ginibre):
        out = {"kind": "ginibre", "sigma": d.sigma}
    elif isinstance(d, DiagonalComplexUniform):
        out = {"kind": "uniform", "radius_min": d.radius_min, "radius_max": d.radius_max}
    elif isinstance(d, Fixed):
        out = {"kind": "fixed", "matrix": d.matrix}
    else:
        out = {"kind": "shifted", "matrix": d.base, "sigma": d.sigma}
    out["resample_threshold"] = d.resample_threshold
    return out


# --------------------------------------------------------------------------
# config
# --------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class ExperimentConfig:
    experiment: str
    model: ModelConfig
    params: dict = field(default_factory=dict)
    output_dir: Path = Path("out")
    threads: Any = 1

    def __post_init__(self):
        if self.experiment not in EXPERIMENTS:
            raise ConfigInvalid(f"unknown experiment {self.experiment!r}")
        schema = SCHEMAS[self.experiment]
        unknown = set(self.params) - set(schema)
        if unknown:
            raise ConfigInvalid(f"unknown parameters for {self.experiment}: {sorted(unknown)}")
        resolved = {k: self.params.get(k, default) for k, (_, default) in schema.items()}
        _validate_params(self.experiment, resolved)
        object.__setattr__(self, "params", resolved)
        object.__setattr__(self, "output_dir", Path(self.output_dir))
        if self.threads != "auto":
            try:
                t = int(self.threads)
            except (TypeError, ValueError):
                raise ConfigInvalid(f"threads must be an integer or 'auto', got {self.threads!r}") from None
            if t < 1:
                raise ConfigInvalid("threads must be >= 1")
            object.__setattr__(self, "threads", t)

    def with_overrides(self, seed: Optional[int] = None, threads=None, output_dir=None) -> "ExperimentConfig":
        model = self.model if seed is None else replace(self.model, seed=int(seed))
        return replace(self, model=model, threads=self.threads if threads is None else threads,
                       output_dir=self.output_dir if output_dir is None else Path(output_dir))

    def echo(self) -> str:
        """Resolved configuration in the input format (defaults included).

        ``threads`` and ``output_dir`` are left out: they do not change results.
        """
        cp = configparser.ConfigParser(interpolation=None)
        cp["experiment"] = {"name": self.experiment}
        cp["model"] = {"n_internal": fmt(self.model.n_internal), "seed": fmt(self.model.seed)}
        for name, d in (("alpha0", self.model.alpha0), ("alpha1", self.model.alpha1)):
            cp[name] = {k: format_value(v) for k, v in _distribution_fields(d).items()}
        if self.model.onsite is not None:
            cp["onsite"] = {"kind": "gue", "scale": fmt(self.model.onsite.scale)}
        cp["params"] = {k: format_value(v) for k, v in self.params.items()}
        lines = []
        for sec in cp.sections():
            lines.append(f"[{sec}]")
            lines.extend(f"{k} = {v}" for k, v in cp[sec].items())
            lines.append("")
        return "\n".join(lines)

    @property
    def hash(self) -> str:
        return content_hash(self.echo())


def parse_config(text: str) -> ExperimentConfig:
    cp = configparser.ConfigParser(interpolation=None)
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigInvalid(f"unreadable config: {exc}") from None
    try:
        exp = cp.get("experiment", "name", fallback=None)
        if exp is None:
            raise ConfigInvalid("missing [experiment] name")
        if exp not in EXPERIMENTS:
            raise ConfigInvalid(f"unknown experiment {exp!r}")
        m = cp["model"] if cp.has_section("model") else {}
        n = _int(m.get("n_internal", "1"))
        seed = _int(m.get("seed", "0"))
        if n < 1:
            raise ConfigInvalid("n_internal must be >= 1")
        if seed < 0:
            raise ConfigInvalid("seed must be >= 0")
        for name in ("alpha0", "alpha1"):
            if not cp.has_section(name):
                raise ConfigInvalid(f"missing [{name}] section")
        onsite = None
        if cp.has_section("onsite"):
            if cp["onsite"].get("kind", "gue").strip().lower() != "gue":
                raise ConfigInvalid("[onsite] kind must be gue")
            onsite = GUE(_float(cp["onsite"].get("scale", "1")))
        model = ModelConfig(n, _distribution(cp["alpha0"], "alpha0"), _distribution(cp["alpha1"], "alpha1"),
                            onsite, seed)
        for d in (model.alpha0, model.alpha1):
            if isinstance(d, (Fixed, ShiftedGinibre)):
                mat = d.matrix if isinstance(d, Fixed) else d.base
                if mat.shape != (n, n):
                    raise ConfigInvalid(f"matrix shape {mat.shape} does not match n_internal = {n}")
        schema = SCHEMAS[exp]
        params = {}
        if cp.has_section("params"):
            for key, raw in cp["params"].items():
                if key not in schema:
                    raise ConfigInvalid(f"unknown parameter {key!r} for {exp}")
                params[key] = schema[key][0](raw)
        ex = cp["experiment"]
        return ExperimentConfig(exp, model, params, Path(ex.get("output_dir", "out")), ex.get("threads", "1"))
    except ConfigInvalid:
        raise
    except (KeyError, ValueError, TypeError) as exc:
        raise ConfigInvalid(f"invalid config value: {exc}") from None


def load_config(path) -> ExperimentConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigInvalid(f"cannot read {path}: {exc}") from None
    return parse_config(text)
