import csv
import io
import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from climcast.errors import ArtifactIOError, RangeError, ShapeError
from climcast.experiments import (
    ExperimentConfig,
    ExperimentResult,
    recursive_forecast,
    run_generalizability_experiment,
    run_pipeline,
    run_robustness_experiment,
)
from climcast.features import FeatureSpec
from climcast.ingest import descriptive_stats
from climcast.report import emit_plot_series, emit_report, emit_standard_plots, read_text
from climcast.stats import acf, difference
from climcast.synth import SyntheticSpec, inject_trend, shift_region, synth_generate
from climcast.training import HyperParams, TrainConfig

FAST = ExperimentConfig(hyperparams=HyperParams(8, 8, 0.005, 32, 0.1),
                        train=TrainConfig(max_epochs=4, early_stopping_patience=2), n_boot=100)


# ---- synth -------------------------------------------------------------------

def test_noiseless_sinusoid_is_exact():
    s = synth_generate(SyntheticSpec(n_months=48, noise_std=0.0))
    t = np.arange(48)
    np.testing.assert_allclose(s.values(), 25 + 4 * np.sin(2 * np.pi * t / 12), atol=1e-12)


def test_pure_ramp_ends_two_above_start():
    v = synth_generate(SyntheticSpec(n_months=36, seasonal_amplitude=0, noise_std=0, trend_total=2)).values()
    assert v[-1] - v[0] == pytest.approx(2.0, abs=1e-12)
    np.testing.assert_allclose(np.diff(v), 2 / 35, atol=1e-12)


def test_seasonal_acf_dominates_short_lag():
    r = acf(synth_generate(SyntheticSpec()), 12).rho
    assert r[12] > r[3]


def test_synth_is_seeded_and_validated():
    assert synth_generate(SyntheticSpec(seed=4)).records == synth_generate(SyntheticSpec(seed=4)).records
    assert synth_generate(SyntheticSpec(seed=4)).records != synth_generate(SyntheticSpec(seed=5)).records
    with pytest.raises(RangeError):
        SyntheticSpec(n_months=10)
    with pytest.raises(RangeError):
        SyntheticSpec(ar1_coefficient=1.0)


def test_inject_trend_examples():
    s = synth_generate(SyntheticSpec(n_months=60))
    w = inject_trend(s, 2.0)
    assert w.values()[0] == s.values()[0]
    assert w.values()[-1] - s.values()[-1] == pytest.approx(2.0, abs=1e-12)
    np.testing.assert_allclose(difference(w.values()) - difference(s.values()), 2 / 59, atol=1e-12)
    assert inject_trend(s, 0.0).records == s.records


def test_shift_examples():
    s = synth_generate(SyntheticSpec(n_months=60))
    up = shift_region(s, 2.0)
    assert descriptive_stats(up)["mean"] == pytest.approx(descriptive_stats(s)["mean"] + 2.0, abs=1e-12)
    np.testing.assert_allclose(acf(up, 24).rho, acf(s, 24).rho, atol=1e-12)


@settings(max_examples=40, deadline=None)
@given(st.floats(-10, 10), st.integers(0, 1000))
def test_perturbations_invert_exactly_up_to_rounding(delta, seed):
    s = synth_generate(SyntheticSpec(n_months=24, seed=seed))
    np.testing.assert_allclose(shift_region(shift_region(s, delta), -delta).values(), s.values(), atol=1e-12)
    np.testing.assert_allclose(inject_trend(inject_trend(s, delta), -delta).values(), s.values(), atol=1e-12)


# ---- experiments -------------------------------------------------------------

def test_experiment_result_formula():
    r = ExperimentResult("x", 0.5, 0.6)
    assert r.degradation_pct == pytest.approx(20.0)
    doc = r.to_dict()
    assert doc["degradation_pct"] == 100 * (doc["scenario_mse"] - doc["baseline_mse"]) / doc["baseline_mse"]


@pytest.fixture(scope="module")
def series():
    return synth_generate(SyntheticSpec(n_months=240, seed=1))


@pytest.fixture(scope="module")
def pipeline(series):
    return run_pipeline(series, FAST)


def test_pipeline_report_is_complete(pipeline):
    assert pipeline.report is not None
    assert set(pipeline.report.metrics) >= {"mse", "r2", "nrmse", "mse_normalized"}
    assert pipeline.report.extreme_breakdown["n"] == len(pipeline.actuals)
    assert pipeline.test_mse == pytest.approx(pipeline.report.point("mse"))


def test_generalization_delta_zero_is_exactly_zero(series, pipeline):
    r = run_generalizability_experiment(series, 0.0, FAST, baseline_mse=pipeline.test_mse)
    assert r.degradation_pct == 0.0


def test_robustness_is_deterministic(series):
    a = run_robustness_experiment(series, FAST)
    b = run_robustness_experiment(series, FAST)
    for k in ("without_trend_feature", "with_trend_feature"):
        assert a[k].to_dict() == b[k].to_dict()
    assert a["total_delta"] == 2.0


def test_recursive_forecast(series, pipeline):
    spec = FAST.features
    out = recursive_forecast(pipeline.params, series, spec, pipeline.split.train.normalization, 5)
    assert [(y, m) for y, m, _ in out] == [(1921, 1), (1921, 2), (1921, 3), (1921, 4), (1921, 5)]
    assert all(np.isfinite(v) for *_, v in out)
    # the first step only sees observed data, so it matches a direct one-step prediction
    again = recursive_forecast(pipeline.params, series, spec, pipeline.split.train.normalization, 1)
    assert again[0] == out[0]
    with pytest.raises(RangeError):
        recursive_forecast(pipeline.params, series, spec, pipeline.split.train.normalization, 0)


# ---- report ------------------------------------------------------------------

def test_empty_report_is_valid_json():
    doc = json.loads(emit_report([]))
    assert doc["results"] == [] and "format_version" in doc


def test_report_round_trip(tmp_path):
    results = [ExperimentResult("a", 1.0, 1.5), {"x": float("nan"), "y": np.float64(2.0)}]
    text = emit_report(results, tmp_path / "r.json", meta={"seed": 0})
    doc = json.loads(read_text(tmp_path / "r.json"))
    assert doc == json.loads(text)
    assert doc["results"][0]["degradation_pct"] == 50.0
    assert doc["results"][1] == {"x": None, "y": 2.0}


def test_actual_vs_predicted_rows_match_test_set(tmp_path, series, pipeline):
    emit_standard_plots(tmp_path, series, pipeline.predictions, pipeline.actuals, pipeline.timestamps)
    rows = list(csv.DictReader(io.StringIO((tmp_path / "actual_vs_predicted.csv").read_text())))
    assert len(rows) == len(pipeline.actuals) == len(pipeline.split.test)
    for name in ("acf", "rolling_stats", "lag_overlay", "residuals"):
        assert (tmp_path / f"{name}.csv").exists()


def test_plot_series_errors(tmp_path):
    with pytest.raises(ShapeError):
        emit_plot_series("bad", {"a": [1, 2], "b": [1]})
    text = emit_plot_series("gap", {"a": [1.0, float("nan")], "b": [1, 2]})
    assert text.splitlines()[-1] == ",2"
    blocker = tmp_path / "blocker"
    blocker.write_text("")
    with pytest.raises(ArtifactIOError) as exc:
        emit_report([], blocker / "report.json")
    assert "blocker" in str(exc.value)
