import json

import numpy as np
import pytest
from sklearn.base import clone

from chirallab import seeding
from chirallab.cli import EXIT_CONFIG, EXIT_NUMERICAL, EXIT_OK, main
from chirallab.config import SCHEMAS, ExperimentConfig, parse_config
from chirallab.estimators import LyapunovSpectrum, SectorSpectrumEstimator
from chirallab.exceptions import ConfigInvalid, DegenerateFit
from chirallab.fitting import ExponentialDecay, fit_exponential
from chirallab.lyapunov import Verdict, sector_spectrum_zero
from chirallab.model import Ginibre, ModelConfig
from chirallab.records import content_hash
from chirallab.runner import run, sqrt_w_sweep

MODEL = """\
[model]
n_internal = {n}
seed = {seed}

[alpha0]
kind = ginibre
sigma = 1.0

[alpha1]
kind = ginibre
sigma = 0.5
"""


def config_text(experiment, params="", n=2, seed=0, out="out"):
    text = f"[experiment]\nname = {experiment}\noutput_dir = {out}\n\n" + MODEL.format(n=n, seed=seed)
    if params:
        text += "\n[params]\n" + params
    return text


def write_config(tmp_path, experiment, params="", **kw):
    path = tmp_path / f"{experiment}.ini"
    path.write_text(config_text(experiment, params, out=str(tmp_path / "out"), **kw))
    return path


# ---------------------------------------------------------------- config


def test_echo_round_trips_and_prints_defaults():
    cfg = parse_config(config_text("sector-zero", "steps = 2000\n"))
    echo = cfg.echo()
    for key in SCHEMAS["sector-zero"]:
        assert f"\n{key} = " in echo
    again = parse_config("[experiment]\nname = sector-zero\n" + echo.split("\n", 2)[2])
    assert again.echo() == echo
    assert again.hash == cfg.hash == content_hash(echo)
    assert len(cfg.hash) == 40


def test_hash_ignores_threads_and_output_but_not_seed():
    cfg = parse_config(config_text("chart-check"))
    assert cfg.with_overrides(threads=4, output_dir="elsewhere").hash == cfg.hash
    assert cfg.with_overrides(seed=1).hash != cfg.hash


@pytest.mark.parametrize("text", [
    config_text("no-such-experiment"),
    config_text("lyapunov", "stepz = 2000\n"),
    config_text("lyapunov", "steps = 999\n"),
    config_text("lyapunov", "steps = 2001\n"),
    config_text("fm-decay", "s = 1.5\n"),
    config_text("apriori", "z_list = 0\n"),
    config_text("apriori", "window_len = 31\n"),
    config_text("convergence", "z = 1.0\n"),
    config_text("chart-check", n=0),
    config_text("chart-check", seed=-1),
    "[experiment]\nname = bloch\n",
    "not an ini file",
])
def test_invalid_configs_are_rejected(text):
    with pytest.raises(ConfigInvalid):
        parse_config(text)


def test_invalid_threads_and_matrix_shape():
    with pytest.raises(ConfigInvalid):
        parse_config(config_text("bloch").replace("output_dir", "threads = zero\noutput_dir"))
    text = config_text("bloch").replace("kind = ginibre\nsigma = 1.0", "kind = fixed\nmatrix = 1 0")
    with pytest.raises(ConfigInvalid):
        parse_config(text)
    cfg = ExperimentConfig("bloch", ModelConfig(1, Ginibre(1.0), Ginibre(1.0)), threads="auto")
    assert cfg.threads == "auto"


# ---------------------------------------------------------------- runner


def test_zero_energy_check_example(tmp_path):
    cfg = parse_config(config_text("zero-energy-check", "half_lengths = 4\nseeds = 10\n",
                                   out=str(tmp_path)))
    res = run(cfg)
    assert res.summary["closed_form_max_dev"] <= 1e-8
    assert res.summary["kernel_ok"] and res.summary["closed_form_same_parity_exact_zero"]


def test_chart_check_example(tmp_path):
    res = run(parse_config(config_text("chart-check", "samples = 1000\n", out=str(tmp_path))))
    assert res.summary["max_chart_defect"] <= 1e-10


def test_unknown_experiment_writes_nothing(tmp_path):
    path = write_config(tmp_path, "chart-check")
    assert main(["no-such-experiment", "--config", str(path)]) == EXIT_CONFIG
    assert not (tmp_path / "out").exists()
    path.write_text(config_text("no-such-experiment", out=str(tmp_path / "out")))
    assert main(["chart-check", "--config", str(path)]) == EXIT_CONFIG
    assert not (tmp_path / "out").exists()


def test_every_output_carries_the_config_hash(tmp_path):
    res = run(parse_config(config_text("bloch", "samples = 20\nrefinements = 64\n", out=str(tmp_path))))
    assert len(res.files) >= 3
    for f in res.files:
        first = open(f).readline()
        if f.endswith(".json"):
            assert json.load(open(f))["#"]["config_hash"] == res.config_hash
        else:
            assert first.startswith("#") and res.config_hash in first


def test_runs_are_byte_identical_and_thread_independent(tmp_path):
    text = "steps = 2000\nrealizations = 4\nenergies = 0.5, 1+0.5j\n"
    outputs = []
    for sub, threads in (("a", 1), ("b", 1), ("c", 2)):
        cfg = parse_config(config_text("lyapunov", text, out=str(tmp_path / sub))).with_overrides(threads=threads)
        res = run(cfg)
        outputs.append({f.split("/")[-1]: open(f).read() for f in res.files})
    assert outputs[0] == outputs[1] == outputs[2]


# ---------------------------------------------------------------- cli


def test_cli_exit_codes(tmp_path, capsys, monkeypatch):
    path = write_config(tmp_path, "chart-check", "samples = 5\n")
    assert main(["chart-check", "--config", str(path), "--seed", "3"]) == EXIT_OK
    out = json.loads(capsys.readouterr().out)
    assert out["experiment"] == "chart-check"
    assert out["config_hash"] == parse_config(path.read_text()).with_overrides(seed=3).hash
    assert main(["bloch", "--config", str(path)]) == EXIT_CONFIG  # experiment mismatch
    assert main(["chart-check", "--config", str(tmp_path / "missing.ini")]) == EXIT_CONFIG
    assert main(["chart-check", "--config", str(path), "--seed", "-1"]) == EXIT_CONFIG
    monkeypatch.setenv("LAB_THREADS", "0")
    assert main(["chart-check", "--config", str(path)]) == EXIT_CONFIG
    monkeypatch.setenv("LAB_THREADS", "2")
    assert main(["chart-check", "--config", str(path)]) == EXIT_OK
    assert main(["chart-check", "--config", str(path), "--threads", "auto"]) == EXIT_OK


def test_cli_numerical_failure(tmp_path):
    # zero hopping blocks can never be resampled into invertible ones
    path = tmp_path / "c.ini"
    path.write_text(config_text("chart-check", "samples = 2\n", n=1, out=str(tmp_path / "out"))
                    .replace("kind = ginibre\nsigma = 1.0", "kind = fixed\nmatrix = 0"))
    assert main(["chart-check", "--config", str(path)]) == EXIT_NUMERICAL


# ---------------------------------------------------------------- sqrt-W sweep


def test_sqrt_w_singleton_is_the_sector_spectrum():
    model = ModelConfig(1, Ginibre(1.0), Ginibre(1.0), seed=5)
    table = sqrt_w_sweep(model, [3], 4000, 4)
    direct = sector_spectrum_zero(ModelConfig(3, Ginibre(np.exp(-1 / 3)), Ginibre(np.exp(-2 / 3)), seed=5),
                                  4000, 4, group=4)
    assert np.array_equal(table.spectra[0].xis_plus, direct.xis_plus)
    assert table.min_xi[0] == np.abs(direct.xis_plus).min()
    assert np.isnan(table.slope)
    with pytest.raises(ValueError):
        sqrt_w_sweep(model, [], 4000, 4)


def test_sqrt_w_exact_points():
    model = ModelConfig(1, Ginibre(1.0), Ginibre(1.0))
    table = sqrt_w_sweep(model, [2, 4, 8], 2000, 2)
    # W = 8 puts an exact sector exponent at zero
    assert table.exact_min_xi[2] == pytest.approx(0.0, abs=1e-12)


@pytest.mark.xfail(strict=True, reason="sector exponents spread with N; W min|xi| is not pinned to 1")
def test_sqrt_w_product_is_one():
    table = sqrt_w_sweep(ModelConfig(1, Ginibre(1.0), Ginibre(1.0), seed=1), [2, 4, 8], 20_000, 8)
    assert np.all(np.abs(table.w_times_min - 1) <= 3 * table.w * table.min_xi_stderr)


@pytest.mark.xfail(strict=True, reason="sector exponents spread with N; no 1/W law for min|xi|")
def test_sqrt_w_slope_is_minus_one():
    table = sqrt_w_sweep(ModelConfig(1, Ginibre(1.0), Ginibre(1.0), seed=1), [2, 4, 8], 20_000, 8)
    assert abs(table.slope + 1) <= 0.1


# ---------------------------------------------------------------- fitting


def test_fit_exponential_examples():
    x = np.arange(11.0)
    fit = fit_exponential(x, np.exp(-0.3 * x))
    assert fit.rate == pytest.approx(0.3, abs=1e-12) and fit.r_squared == pytest.approx(1.0)
    assert fit_exponential(x, np.full(11, 2.5)).rate == 0
    noisy = np.exp(-0.3 * x) * (1 + 0.01 * np.random.default_rng(0).standard_normal(11))
    assert abs(fit_exponential(x, noisy).rate - 0.3) <= 0.02
    part = fit_exponential(x, np.exp(-0.3 * x), window=(2, 5))
    assert part.n_points == 4 and part.window == (2.0, 5.0)


def test_fit_exponential_errors():
    with pytest.raises(DegenerateFit):
        fit_exponential([1.0, 2.0], [1.0, 0.5])
    with pytest.raises(DegenerateFit):
        fit_exponential([1.0, 1.0, 1.0], [1.0, 0.5, 0.2])
    with pytest.raises(DegenerateFit):
        fit_exponential(np.arange(10.0), np.ones(10), window=(20, 30))
    with pytest.raises(ValueError):
        fit_exponential([0.0, 1.0, 2.0], [1.0, -1.0, 1.0])


def test_exponential_decay_regressor():
    x = np.linspace(0, 10, 30)
    model = ExponentialDecay().fit(x[:, None], 3 * np.exp(-0.4 * x))
    assert model.rate_ == pytest.approx(0.4)
    assert np.allclose(model.predict(x[:, None]), 3 * np.exp(-0.4 * x))
    assert model.score(x[:, None], 3 * np.exp(-0.4 * x)) == pytest.approx(1.0)
    assert clone(ExponentialDecay(window=(1, 5))).get_params() == {"window": (1, 5)}


# ---------------------------------------------------------------- seeding


def test_derive_seed_examples():
    assert seeding.derive_seed(42, 0, 7, 1) == seeding.derive_seed(42, 0, 7, 1)
    assert seeding.derive_seed(42, 0, 7, 1) != seeding.derive_seed(42, 1, 7, 1)
    assert 0 <= seeding.derive_seed(2**64 - 1, 3, -5, 0) < 2**64


def test_derived_keys_do_not_collide():
    keys = np.concatenate([seeding.derive_seeds(9, idx, np.arange(-250_000, 250_000), idx % 2)
                           for idx in range(2)])
    assert keys.size == 1_000_000
    assert np.unique(keys).size == keys.size


# ---------------------------------------------------------------- estimators


def test_estimator_params_and_fit():
    est = LyapunovSpectrum(z=1.0, steps=2000, realizations=2)
    assert clone(est).get_params() == est.get_params()
    est.set_params(z=0.5)
    cfg = ModelConfig(1, Ginibre(1.0), Ginibre(1.0), seed=2)
    est.fit(cfg)
    assert est.gammas_.shape == (2,) and est.std_errors_.shape == (2,)
    sector = SectorSpectrumEstimator(steps=20_000, realizations=4).fit(
        ModelConfig(1, Ginibre(np.e), Ginibre(1.0), seed=2))
    assert sector.verdict_ is Verdict.LOCALIZED
    assert sector.xis_plus_[0] == pytest.approx(1.0, abs=0.1)
