"""Synthetic monthly climate series and the trend/shift perturbations used in experiments."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .errors import EmptyDataError, RangeError
from .ingest import MonthlySeries


@dataclass(frozen=True)
class SyntheticSpec:
    n_months: int = 480
    base_level: float = 25.0
    seasonal_amplitude: float = 4.0
    seasonal_period: int = 12
    trend_total: float = 0.0
    noise_std: float = 0.4
    ar1_coefficient: float = 0.5
    seed: int = 0
    start_year: int = 1901
    variable_name: str = "tem"
    unit: str = "degC"

    def __post_init__(self):
        if self.n_months < 24:
            raise RangeError("n_months must be >= 24")
        if not abs(self.ar1_coefficient) < 1:
            raise RangeError("|ar1_coefficient| must be < 1")
        if self.noise_std < 0:
            raise RangeError("noise_std must be non-negative")
        if self.seasonal_period < 2:
            raise RangeError("seasonal_period must be >= 2")

    def to_dict(self) -> dict:
        return asdict(self)


def ar1_noise(n: int, phi: float, std: float, rng: np.random.Generator) -> np.ndarray:
    """Stationary AR(1) path with innovation std ``std`` (first value drawn from the stationary law)."""
    eps = rng.standard_normal(n) * std
    out = np.empty(n)
    out[0] = eps[0] / np.sqrt(1.0 - phi * phi)
    for t in range(1, n):
        out[t] = phi * out[t - 1] + eps[t]
    return out


def synth_generate(spec: SyntheticSpec) -> MonthlySeries:
    n = spec.n_months
    t = np.arange(n)
    rng = np.random.default_rng(spec.seed)
    values = (spec.base_level
              + spec.seasonal_amplitude * np.sin(2.0 * np.pi * t / spec.seasonal_period)
              + spec.trend_total * t / (n - 1))
    if spec.noise_std > 0:
        values = values + ar1_noise(n, spec.ar1_coefficient, spec.noise_std, rng)
    return MonthlySeries.from_values(spec.variable_name, values.tolist(), spec.unit, (spec.start_year, 1))


def inject_trend(series: MonthlySeries, total_delta: float = 2.0) -> MonthlySeries:
    """Add a linear ramp rising from 0 at the first record to ``total_delta`` at the last."""
    n = len(series)
    if n == 0:
        raise EmptyDataError("cannot inject a trend into an empty series")
    ramp = np.zeros(1) if n == 1 else total_delta * np.arange(n) / (n - 1)
    vals = [None if r.value is None else r.value + float(d) for r, d in zip(series.records, ramp)]
    return series.with_values(vals)


def shift_region(series: MonthlySeries, delta: float) -> MonthlySeries:
    if len(series) == 0:
        raise EmptyDataError("cannot shift an empty series")
    return series.with_values([None if r.value is None else r.value + delta for r in series.records])
