"""Acceptance criteria 1-10; each test prints one PASS/FAIL line with its timing."""

import functools
import json
import time

import numpy as np
import pytest

from climcast.cli import cli_dispatch
from climcast.evaluation import evaluate, extreme_mse_ratio, metrics_with_ci, stratify_extremes
from climcast.experiments import (
    ExperimentConfig,
    run_generalizability_experiment,
    run_pipeline,
    run_robustness_experiment,
)
from climcast.features import (
    FeatureSpec,
    assemble,
    audit_provenance,
    normalize_with,
    temporal_split,
    window_sequences,
)
from climcast.neural import Dims, attention_forward, finite_difference_grad, init_params, loss_and_grads
from climcast.neural import max_relative_error
from climcast.stats import acf, adf_test, seasonal_decompose_additive
from climcast.synth import SyntheticSpec, synth_generate
from climcast.training import REFERENCE_HYPERPARAMS, predict

LEARNING_FIXTURE = SyntheticSpec(n_months=480, seed=0)
ROBUSTNESS_SEEDS = (0, 1, 2)
ROBUSTNESS_MONTHS = 1476  # 123 years of monthly records
_terminal = None


@pytest.fixture(autouse=True)
def _reporter(pytestconfig):
    global _terminal
    _terminal = pytestconfig.pluginmanager.get_plugin("terminalreporter")


def _emit(line):
    if _terminal is not None:
        _terminal.write_line(line)
    else:
        print(line)


def criterion(number, title, budget_s):
    """Time the wrapped test, enforce its budget and print one PASS/FAIL line."""
    def wrap(fn):
        @functools.wraps(fn)
        def run(*args, **kwargs):
            t0 = time.perf_counter()
            detail, error = "", None
            try:
                detail = fn(*args, **kwargs) or ""
            except Exception as exc:  # noqa: BLE001 - reported then re-raised
                error = exc
            elapsed = time.perf_counter() - t0
            if error is None and elapsed >= budget_s:
                error = AssertionError(f"took {elapsed:.1f}s, budget {budget_s}s")
            status = "PASS" if error is None else "FAIL"
            msg = detail if error is None else f"{type(error).__name__}: {error}"
            _emit(f"{status} criterion {number} ({title}) [{elapsed:.1f}s / {budget_s}s] {msg}")
            if error is not None:
                raise error
        return run
    return wrap


def _tiny_case(variant, seed):
    dims = Dims(F=3, d_h=4, d_a=4 if variant == "attention_lstm" else 0, T=5)
    p = init_params(variant, dims, seed)
    rng = np.random.default_rng(seed + 100)
    for name, v in p.tensors.items():
        if name.startswith("b_"):
            v[...] = rng.normal(0, 0.3, v.shape)
    return p, rng.normal(size=(dims.T, dims.F)), rng.normal()


@criterion(1, "gradient correctness", 10)
def test_criterion_1_gradients():
    worst = 0.0
    for variant in ("attention_lstm", "simple_lstm", "gru"):
        for seed in range(10):
            p, x, y = _tiny_case(variant, seed)
            _, analytic = loss_and_grads(x, [y], p)
            numeric = finite_difference_grad(x, p, [y], eps=1e-5)
            err = max(max_relative_error(analytic, numeric).values())
            assert err < 1e-4, f"{variant} seed {seed}: relative error {err:.2e}"
            worst = max(worst, err)
    return f"worst relative error {worst:.2e} over 3 variants x 10 seeds"


@criterion(2, "attention invariants", 5)
def test_criterion_2_attention():
    rng = np.random.default_rng(2024)
    for _ in range(1000):
        T, d_h, d_a = rng.integers(1, 13), rng.integers(1, 9), rng.integers(1, 9)
        t = {"W_h": rng.normal(0, 2, (d_h, d_a)), "b_h": rng.normal(size=d_a), "u": rng.normal(0, 2, d_a)}
        H = rng.normal(0, 3, (1, T, d_h))
        _, alpha, _ = attention_forward(H, t)
        assert np.all(alpha >= 0)
        assert abs(alpha.sum() - 1.0) <= 1e-9
        same = np.repeat(H[:, :1], T, axis=1)
        np.testing.assert_allclose(attention_forward(same, t)[1], 1.0 / T, atol=1e-12)
        assert attention_forward(H[:, :1], t)[1].tolist() == [[1.0]]
    return "1000 random inputs"


@criterion(3, "statistical oracles", 10)
def test_criterion_3_stats():
    r = acf(np.cos(2 * np.pi * np.arange(240) / 12), 12).rho
    assert r[12] >= 0.95 and r[6] <= -0.95
    walk = adf_test(np.cumsum(np.random.default_rng(0).normal(size=500)))
    noise = adf_test(np.random.default_rng(0).normal(size=500))
    assert walk.p_value > 0.05 and noise.p_value < 0.01
    t = np.arange(240)
    d = seasonal_decompose_additive(10 + 0.05 * t + 3 * np.sin(2 * np.pi * t / 12))
    resid = np.max(np.abs(d.residual[d.defined]))
    assert resid < 1e-6
    return (f"rho12={r[12]:.3f} rho6={r[6]:.3f} p_walk={walk.p_value:.3f} "
            f"p_noise={noise.p_value:.3f} max|resid|={resid:.1e}")


@criterion(4, "anti-leakage", 5)
def test_criterion_4_leakage():
    full = FeatureSpec(decomposition_features=True, trend_feature=True)
    fixtures = [synth_generate(LEARNING_FIXTURE)]
    fixtures += [synth_generate(SyntheticSpec(n_months=ROBUSTNESS_MONTHS, seed=s)) for s in ROBUSTNESS_SEEDS]
    for series in fixtures:
        for spec in (FeatureSpec(), full):
            assert audit_provenance(assemble(series, spec)) == []
    x = np.random.default_rng(0).normal(size=1468 + 12)
    m = assemble(x, FeatureSpec(lags=(1, 12), rolling_windows=(), cyclical_month=False))
    sp = temporal_split(m)
    sizes = (len(sp.train), len(sp.validation), len(sp.test))
    assert len(m) == 1468 and sizes == (1028, 220, 220)
    return f"{len(fixtures)} fixtures audited clean, split {sizes}"


@pytest.fixture(scope="module")
def learned():
    t0 = time.perf_counter()
    result = run_pipeline(synth_generate(LEARNING_FIXTURE), ExperimentConfig(hyperparams=REFERENCE_HYPERPARAMS))
    return result, time.perf_counter() - t0


@criterion(5, "learning capability", 120)
def test_criterion_5_learning(learned):
    result, seconds = learned
    m = evaluate(result.predictions, result.actuals)
    epochs = result.history.epochs_run
    assert epochs <= 100
    assert m["r2"] >= 0.90 and m["nrmse"] <= 0.10, m
    assert seconds < 120
    return f"R2={m['r2']:.4f} NRMSE={m['nrmse']:.4f} epochs={epochs} train+eval {seconds:.1f}s"


@criterion(6, "robustness ordering", 600)
def test_criterion_6_robustness():
    config = ExperimentConfig()
    rows, failures = [], []
    for seed in ROBUSTNESS_SEEDS:
        series = synth_generate(SyntheticSpec(n_months=ROBUSTNESS_MONTHS, seed=seed))
        rob = run_robustness_experiment(series, config)
        base = rob["baseline_mse"]
        wo, w = rob["without_trend_feature"].degradation_pct, rob["with_trend_feature"].degradation_pct
        g0 = run_generalizability_experiment(series, 0.0, config, base).degradation_pct
        g2 = run_generalizability_experiment(series, 2.0, config, base).degradation_pct
        rows.append(f"seed {seed}: trend wo={wo:+.1f}% w={w:+.1f}%, shift d0={g0:+.1f}% d2={g2:+.1f}%")
        if not w < wo:
            failures.append(f"seed {seed} trend ordering ({w:+.1f}% >= {wo:+.1f}%)")
        if not g2 > g0:
            failures.append(f"seed {seed} shift ordering ({g2:+.1f}% <= {g0:+.1f}%)")
    summary = "; ".join(rows)
    assert not failures, f"{', '.join(failures)} | {summary}"
    return summary


@criterion(7, "extreme-event stratification", 30)
def test_criterion_7_extremes():
    rng = np.random.default_rng(7)
    actual = rng.normal(25, 4, 5000)
    err = rng.normal(0, 1, 5000)
    err[actual >= np.percentile(actual, 90)] *= 3
    ratio = extreme_mse_ratio(stratify_extremes(actual - err, actual), 90)
    assert 7 <= ratio <= 11
    return f"extreme/normal MSE ratio {ratio:.2f}"


@criterion(8, "uncertainty machinery", 60)
def test_criterion_8_bootstrap(learned):
    result, _ = learned
    report = metrics_with_ci(result.predictions, result.actuals, n_boot=1000, seed=0)
    for name, ci in report.metrics.items():
        assert ci.lower <= ci.point <= ci.upper, name
    # independent series from the same generator, scored with the fitted normalization
    other = synth_generate(SyntheticSpec(n_months=480, seed=100))
    spec = FeatureSpec()
    m = normalize_with(assemble(other, spec), result.split.train.normalization)
    ds = window_sequences(m, spec.sequence_length)
    target = result.split.target_params
    pred = predict(result.params, ds) * target.std + target.mean
    actual = ds.physical_targets()
    small = metrics_with_ci(pred[-400:][:100], actual[-400:][:100], n_boot=1000, seed=1)
    large = metrics_with_ci(pred[-400:], actual[-400:], n_boot=1000, seed=1)
    ratios = {k: small.metrics[k].width / large.metrics[k].width for k in large.metrics}
    bad = {k: round(v, 2) for k, v in ratios.items() if not 1.7 <= v <= 2.3}
    detail = " ".join(f"{k}={v:.2f}" for k, v in ratios.items())
    assert not bad, f"width ratios outside [1.7, 2.3]: {bad} (all: {detail})"
    return f"intervals contain points; width ratios m=100/m=400: {detail}"


@criterion(9, "determinism", 300)
def test_criterion_9_determinism(tmp_path):
    outputs = []
    for name in ("first", "second"):
        rd = tmp_path / name
        for sub in ("synth", "features", "train", "evaluate", "report"):
            assert cli_dispatch([sub, "--run-dir", str(rd), "--seed", "0"]) == 0, sub
        outputs.append((rd / "metrics.json").read_bytes())
    assert outputs[0] == outputs[1]
    r2 = json.loads(outputs[0])["metrics"]["r2"]["point"]
    return f"metrics.json byte-identical ({len(outputs[0])} bytes, R2={r2:.4f})"


@criterion(10, "baseline comparability", 300)
def test_criterion_10_baselines():
    series = synth_generate(LEARNING_FIXTURE)
    scores = {}
    for variant in ("simple_lstm", "gru"):
        result = run_pipeline(series, ExperimentConfig(variant=variant), with_report=False)
        scores[variant] = evaluate(result.predictions, result.actuals)["r2"]
    assert all(v >= 0.85 for v in scores.values()), scores
    return " ".join(f"{k} R2={v:.4f}" for k, v in scores.items())
