"""End-to-end pipeline plus the climate-trend robustness and regional-shift experiments."""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace

import numpy as np

from .evaluation import MetricsReport, metrics_with_ci, stratify_extremes
from .errors import RangeError
from .features import FeatureSpec, SplitDataset, assemble, normalize_with, temporal_split
from .ingest import MonthlySeries, assess_quality
from .neural import ModelParams
from .synth import inject_trend, shift_region
from .training import REFERENCE_HYPERPARAMS, HyperParams, History, TrainConfig, denormalize, predict, train

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class ExperimentConfig:
    variant: str = "attention_lstm"
    features: FeatureSpec = FeatureSpec()
    hyperparams: HyperParams = REFERENCE_HYPERPARAMS
    train: TrainConfig = TrainConfig()
    fractions: tuple[float, float, float] = (0.70, 0.15, 0.15)
    n_boot: int = 1000
    alpha: float = 0.05
    extreme_thresholds: tuple[float, ...] = (90, 95, 99)
    seed: int = 0


@dataclass
class PipelineResult:
    params: ModelParams
    history: History
    split: SplitDataset
    predictions: np.ndarray       # physical units, test set
    actuals: np.ndarray           # physical units, test set
    timestamps: list
    normalized_predictions: np.ndarray
    report: MetricsReport | None = None

    @property
    def test_mse(self) -> float:
        return float(np.mean((self.actuals - self.predictions) ** 2))

    @property
    def errors(self) -> np.ndarray:
        return self.actuals - self.predictions


def prepare_split(series: MonthlySeries, spec: FeatureSpec, fractions=(0.70, 0.15, 0.15),
                  normalization=None) -> SplitDataset:
    if series.n_missing:
        _, series = assess_quality(series)
    matrix = assemble(series, spec)
    return temporal_split(matrix, fractions, normalization)


def score_test_set(params: ModelParams, split: SplitDataset, T: int):
    _, _, te = split.sequences(T)
    norm = predict(params, te)
    tp = split.target_params
    return norm, denormalize(norm, tp), te.physical_targets(), te.timestamps


def run_pipeline(series: MonthlySeries, config: ExperimentConfig = ExperimentConfig(),
                 with_report: bool = True, eval_series: MonthlySeries | None = None) -> PipelineResult:
    """Features -> chronological split -> training -> test-set evaluation.

    With ``eval_series`` the model trained on ``series`` is scored on the test
    slice of ``eval_series`` using the training normalization.
    """
    split = prepare_split(series, config.features, config.fractions)
    T = config.features.sequence_length
    params, history = train(config.variant, split, config.hyperparams, config.train, T)
    eval_split = split
    if eval_series is not None:
        eval_split = prepare_split(eval_series, config.features, config.fractions, split.train.normalization)
    norm, pred, actual, stamps = score_test_set(params, eval_split, T)
    result = PipelineResult(params, history, eval_split, pred, actual, stamps, norm)
    if with_report:
        report = metrics_with_ci(pred, actual, config.n_boot, config.alpha, config.seed,
                                 split.target_params, series.unit)
        report.extreme_breakdown = stratify_extremes(pred, actual, config.extreme_thresholds)
        report.label = config.variant
        result.report = report
    return result


def recursive_forecast(params: ModelParams, series: MonthlySeries, spec: FeatureSpec,
                       normalization: dict, horizon: int) -> list[tuple[int, int, float]]:
    """Forecast ``horizon`` months past the end of ``series``, feeding predictions back as inputs.

    The trend index keeps the scale of the fitted series, so it continues past 1.
    """
    if horizon < 1:
        raise RangeError("horizon must be >= 1")
    T = spec.sequence_length
    values = list(series.values())
    start = series.timestamps[0]
    span = len(values)
    out = []
    for _ in range(horizon):
        # placeholder target; causal features of the new row never read it
        ext = MonthlySeries.from_values(series.variable_name, values + [values[-1]], series.unit, start)
        m = normalize_with(assemble(ext, spec, trend_span=span), normalization)
        if len(m) < T:
            raise RangeError(f"need at least {T} feature rows to forecast, have {len(m)}")
        y = denormalize(predict(params, m.rows[-T:][None]), normalization["target"])[0]
        values.append(float(y))
        out.append((*m.timestamps[-1], float(y)))
    return out


@dataclass(frozen=True)
class ExperimentResult:
    scenario: str
    baseline_mse: float
    scenario_mse: float

    @property
    def degradation_pct(self) -> float:
        return 100.0 * (self.scenario_mse - self.baseline_mse) / self.baseline_mse

    def to_dict(self) -> dict:
        return {"scenario": self.scenario, "baseline_mse": self.baseline_mse,
                "scenario_mse": self.scenario_mse, "degradation_pct": self.degradation_pct}


def _with_trend_feature(config: ExperimentConfig, enabled: bool) -> ExperimentConfig:
    return replace(config, features=replace(config.features, trend_feature=enabled))


def run_robustness_experiment(series: MonthlySeries, config: ExperimentConfig = ExperimentConfig(),
                              total_delta: float = 2.0, baseline_mse: float | None = None) -> dict:
    """Train/test on original data, then on trend-injected data without and with a trend feature.

    MSEs are test-set values in physical units. The trend is added to the raw
    series before any preprocessing.
    """
    plain = _with_trend_feature(config, False)
    if baseline_mse is None:
        baseline_mse = run_pipeline(series, plain, with_report=False).test_mse
    warmed = inject_trend(series, total_delta)
    without = run_pipeline(warmed, plain, with_report=False).test_mse
    with_tf = run_pipeline(warmed, _with_trend_feature(config, True), with_report=False).test_mse
    return {
        "baseline_mse": baseline_mse,
        "total_delta": total_delta,
        "without_trend_feature": ExperimentResult(f"+{total_delta:g} trend (without trend feature)",
                                                  baseline_mse, without),
        "with_trend_feature": ExperimentResult(f"+{total_delta:g} trend (with trend feature)",
                                               baseline_mse, with_tf),
    }


def run_generalizability_experiment(series: MonthlySeries, delta: float,
                                    config: ExperimentConfig = ExperimentConfig(),
                                    baseline_mse: float | None = None) -> ExperimentResult:
    """Train on the series shifted by ``delta`` and test on the original test slice."""
    if baseline_mse is None:
        baseline_mse = run_pipeline(series, config, with_report=False).test_mse
    shifted = shift_region(series, delta)
    mse = run_pipeline(shifted, config, with_report=False, eval_series=series).test_mse
    return ExperimentResult(f"trained on {delta:+g} shifted data", baseline_mse, mse)
