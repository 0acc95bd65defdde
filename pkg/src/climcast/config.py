"""Run configuration: one JSON document validated with pydantic, plus dotted overrides."""

from __future__ import annotations

import json
from pathlib import Path
from typing import Any, Literal

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from .experiments import ExperimentConfig
from .features import ROLLING_STATS, FeatureSpec
from .synth import SyntheticSpec
from .training import SEARCH_SPACE, HyperParams, TrainConfig


class _Section(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class DataSection(_Section):
    path: str | None = None
    variable: str = "tem"
    year_column: str = "Year"
    month_column: str = "Month"
    value_column: str | None = None
    unit: str | None = None
    outlier_k: float = Field(1.5, gt=0)

    def schema_mapping(self) -> dict:
        return {"year": self.year_column, "month": self.month_column,
                "values": {self.variable: self.value_column or self.variable}}


class SyntheticSection(_Section):
    n_months: int = Field(480, ge=24)
    base_level: float = 25.0
    seasonal_amplitude: float = 4.0
    seasonal_period: int = Field(12, ge=2)
    trend_total: float = 0.0
    noise_std: float = Field(0.4, ge=0)
    ar1_coefficient: float = Field(0.5, gt=-1, lt=1)
    seed: int | None = None
    start_year: int = 1901
    variable_name: str = "tem"
    unit: str = "degC"

    def to_spec(self, master_seed: int) -> SyntheticSpec:
        d = self.model_dump()
        d["seed"] = master_seed if self.seed is None else self.seed
        return SyntheticSpec(**d)


class FeatureSection(_Section):
    lags: list[int] = [1, 3, 6, 12]
    rolling_windows: list[int] = [12]
    rolling_stats: list[Literal["mean", "std", "var"]] = list(ROLLING_STATS)
    cyclical_month: bool = True
    decomposition_features: bool = False
    trend_feature: bool = False
    sequence_length: int = Field(12, ge=1)
    period: int = Field(12, ge=2)

    @field_validator("lags")
    @classmethod
    def _positive_lags(cls, v):
        if any(k <= 0 for k in v) or len(set(v)) != len(v):
            raise ValueError("lags must be positive and distinct")
        return v

    @model_validator(mode="after")
    def _valid_spec(self):
        self.to_spec()
        return self

    def to_spec(self) -> FeatureSpec:
        return FeatureSpec(**self.model_dump())


class HyperParamSection(_Section):
    lstm_units: int = Field(64, ge=1)
    attention_units: int = Field(64, ge=1)
    learning_rate: float = Field(0.0005, gt=0)
    batch_size: int = Field(16, ge=1)
    dropout_rate: float = Field(0.1, ge=0, lt=1)

    def to_hyperparams(self) -> HyperParams:
        return HyperParams(**self.model_dump())


class TrainingSection(_Section):
    max_epochs: int = Field(100, ge=1)
    early_stopping_patience: int = Field(10, ge=1)
    loss: Literal["mse"] = "mse"

    @model_validator(mode="after")
    def _patience_below_budget(self):
        if self.early_stopping_patience >= self.max_epochs:
            raise ValueError("early_stopping_patience must be < max_epochs")
        return self

    def to_train_config(self, seed: int) -> TrainConfig:
        return TrainConfig(self.max_epochs, self.early_stopping_patience, seed, self.loss)


class SplitSection(_Section):
    fractions: tuple[float, float, float] = (0.70, 0.15, 0.15)

    @field_validator("fractions")
    @classmethod
    def _sum_to_one(cls, v):
        if any(f <= 0 for f in v) or abs(sum(v) - 1.0) > 1e-9:
            raise ValueError("fractions must be positive and sum to 1")
        return v


class TuningSection(_Section):
    n_trials: int = Field(30, ge=1)
    max_epochs: int = Field(50, ge=2)
    early_stopping_patience: int = Field(10, ge=1)
    search_space: dict[Literal["lstm_units", "attention_units", "learning_rate", "batch_size", "dropout_rate"],
                       list[float]] = Field(default_factory=lambda: {k: list(v) for k, v in SEARCH_SPACE.items()})

    @model_validator(mode="after")
    def _check(self):
        if self.early_stopping_patience >= self.max_epochs:
            raise ValueError("early_stopping_patience must be < max_epochs")
        if any(len(v) == 0 for v in self.search_space.values()):
            raise ValueError("every search dimension needs at least one value")
        return self

    def space(self) -> dict[str, tuple]:
        ints = {"lstm_units", "attention_units", "batch_size"}
        return {k: tuple(int(x) if k in ints else float(x) for x in v) for k, v in self.search_space.items()}


class EvaluationSection(_Section):
    n_boot: int = Field(1000, ge=10)
    alpha: float = Field(0.05, gt=0, lt=1)
    extreme_thresholds: list[float] = [90, 95, 99]

    @field_validator("extreme_thresholds")
    @classmethod
    def _percentiles(cls, v):
        if not v or any(not 0 < t < 100 for t in v):
            raise ValueError("thresholds must lie strictly between 0 and 100")
        return v


class ExperimentSection(_Section):
    total_delta: float = 2.0
    shift_deltas: list[float] = [0.0, 1.0, 2.0]


class ForecastSection(_Section):
    horizon: int = Field(12, ge=1)


class RunConfig(_Section):
    seed: int = 0
    variant: Literal["attention_lstm", "simple_lstm", "gru"] = "attention_lstm"
    data: DataSection = DataSection()
    synthetic: SyntheticSection = SyntheticSection()
    features: FeatureSection = FeatureSection()
    hyperparams: HyperParamSection = HyperParamSection()
    training: TrainingSection = TrainingSection()
    split: SplitSection = SplitSection()
    tuning: TuningSection = TuningSection()
    evaluation: EvaluationSection = EvaluationSection()
    experiments: ExperimentSection = ExperimentSection()
    forecast: ForecastSection = ForecastSection()

    def experiment_config(self, hyperparams: HyperParams | None = None) -> ExperimentConfig:
        return ExperimentConfig(
            variant=self.variant,
            features=self.features.to_spec(),
            hyperparams=hyperparams or self.hyperparams.to_hyperparams(),
            train=self.training.to_train_config(self.seed),
            fractions=tuple(self.split.fractions),
            n_boot=self.evaluation.n_boot,
            alpha=self.evaluation.alpha,
            extreme_thresholds=tuple(self.evaluation.extreme_thresholds),
            seed=self.seed,
        )

    def to_json(self) -> str:
        return json.dumps(self.model_dump(mode="json"), indent=2) + "\n"


class ConfigError(Exception):
    """Invalid or unreadable configuration; ``keys`` lists the offending dotted paths."""

    def __init__(self, message: str, keys: list[str] | None = None):
        self.keys = keys or []
        super().__init__(message)


def _set_dotted(doc: dict, dotted: str, value: Any) -> None:
    parts = dotted.split(".")
    cur = doc
    for p in parts[:-1]:
        nxt = cur.setdefault(p, {})
        if not isinstance(nxt, dict):
            raise ConfigError(f"cannot override {dotted}: {p} is not a section", [dotted])
        cur = nxt
    cur[parts[-1]] = value


def parse_override(item: str) -> tuple[str, Any]:
    """``key.path=value``; the value is parsed as JSON when possible, else kept as text."""
    if "=" not in item:
        raise ConfigError(f"override {item!r} must look like key=value", [item])
    key, raw = item.split("=", 1)
    try:
        value = json.loads(raw)
    except json.JSONDecodeError:
        value = raw
    return key.strip(), value


def build_config(doc: dict | None = None, overrides: dict[str, Any] | None = None) -> RunConfig:
    doc = json.loads(json.dumps(doc or {}))
    for key, value in (overrides or {}).items():
        _set_dotted(doc, key, value)
    try:
        return RunConfig.model_validate(doc)
    except ValidationError as exc:
        keys = [".".join(str(p) for p in err["loc"]) or "<root>" for err in exc.errors()]
        details = "; ".join(f"{k}: {err['msg']}" for k, err in zip(keys, exc.errors()))
        raise ConfigError(f"invalid configuration: {details}", keys) from exc


def load_config(path=None, overrides: dict[str, Any] | None = None) -> RunConfig:
    doc: dict = {}
    if path is not None:
        p = Path(path)
        if not p.is_file():
            raise ConfigError(f"config file not found: {p}", [str(p)])
        try:
            doc = json.loads(p.read_text(encoding="utf-8"))
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config {p}: {exc}", [str(p)]) from exc
        if not isinstance(doc, dict):
            raise ConfigError(f"config {p} must hold a JSON object", ["<root>"])
    return build_config(doc, overrides)
