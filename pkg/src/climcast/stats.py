"""Classical time-series statistics used for lag selection, preprocessing and evaluation."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .errors import (
    DegenerateInputError,
    EmptyDataError,
    InsufficientDataError,
    RangeError,
    ZeroVarianceError,
)


def _as_vector(x) -> np.ndarray:
    if callable(getattr(x, "values", None)):  # MonthlySeries
        x = x.values()
    arr = np.asarray(x, dtype=float)
    if arr.ndim != 1:
        raise RangeError(f"expected a 1-D series, got shape {arr.shape}")
    return arr


@dataclass(frozen=True)
class AcfResult:
    rho: np.ndarray
    significance_bound: float

    def significant_lags(self) -> list[int]:
        return [k for k in range(1, len(self.rho)) if abs(self.rho[k]) > self.significance_bound]

    def to_dict(self) -> dict:
        return {"rho": [float(r) for r in self.rho], "significance_bound": self.significance_bound}


def acf(series, max_lag: int) -> AcfResult:
    """Sample autocorrelation with the global mean and the full-length denominator."""
    x = _as_vector(series)
    n = x.size
    if max_lag < 1 or max_lag >= n:
        raise RangeError(f"max_lag must satisfy 1 <= max_lag < n={n}, got {max_lag}")
    dev = x - x.mean()
    denom = float(dev @ dev)
    if denom <= 0.0 or np.ptp(x) == 0.0:
        raise ZeroVarianceError("autocorrelation of a constant series is undefined")
    rho = np.empty(max_lag + 1)
    rho[0] = 1.0
    for k in range(1, max_lag + 1):
        rho[k] = float(dev[k:] @ dev[:-k]) / denom
    return AcfResult(rho, 2.0 / np.sqrt(n))


@dataclass(frozen=True)
class AdfResult:
    test_statistic: float
    p_value: float
    lag_order: int
    n_obs: int

    @property
    def stationary_at_5pct(self) -> bool:
        return self.p_value < 0.05

    def to_dict(self) -> dict:
        return {
            "test_statistic": self.test_statistic,
            "p_value": self.p_value,
            "lag_order": self.lag_order,
            "n_obs": self.n_obs,
            "stationary_at_5pct": self.stationary_at_5pct,
        }


# Quantiles of the Dickey-Fuller t-statistic, regression with constant and no trend
# (Fuller 1976, Table 8.5.2). Rows: sample size; columns: ADF_PROBS.
ADF_PROBS = np.array([0.01, 0.025, 0.05, 0.10, 0.90, 0.95, 0.975, 0.99])
ADF_SIZES = np.array([25, 50, 100, 250, 500, np.inf])
ADF_QUANTILES = np.array([
    [-3.75, -3.33, -3.00, -2.63, -0.37, 0.00, 0.34, 0.72],
    [-3.58, -3.22, -2.93, -2.60, -0.40, -0.03, 0.29, 0.66],
    [-3.51, -3.17, -2.89, -2.58, -0.42, -0.05, 0.26, 0.63],
    [-3.46, -3.14, -2.88, -2.57, -0.42, -0.06, 0.24, 0.62],
    [-3.44, -3.13, -2.87, -2.57, -0.43, -0.07, 0.24, 0.61],
    [-3.43, -3.12, -2.86, -2.57, -0.44, -0.07, 0.23, 0.60],
])
P_FLOOR, P_CEIL = 0.001, 0.999


def adf_critical_values(n_obs: int) -> np.ndarray:
    """Quantile row for ``n_obs``, interpolated linearly in 1/n between table rows."""
    inv = 1.0 / ADF_SIZES
    target = 1.0 / max(n_obs, ADF_SIZES[0])
    # inv is decreasing; np.interp needs increasing abscissae
    return np.array([np.interp(target, inv[::-1], ADF_QUANTILES[::-1, j])
                     for j in range(ADF_PROBS.size)])


def adf_pvalue(stat: float, n_obs: int) -> float:
    cv = adf_critical_values(n_obs)
    if stat <= cv[0]:
        slope = (ADF_PROBS[1] - ADF_PROBS[0]) / (cv[1] - cv[0])
        p = ADF_PROBS[0] + slope * (stat - cv[0])
    elif stat >= cv[-1]:
        slope = (ADF_PROBS[-1] - ADF_PROBS[-2]) / (cv[-1] - cv[-2])
        p = ADF_PROBS[-1] + slope * (stat - cv[-1])
    else:
        p = np.interp(stat, cv, ADF_PROBS)
    return float(np.clip(p, P_FLOOR, P_CEIL))


def adf_test(series, lag_order: int = 12) -> AdfResult:
    """Augmented Dickey-Fuller test, constant-only regression, fixed lag order.

    Regresses the first difference on the lagged level, ``lag_order`` lagged
    differences and an intercept; the statistic is the t-ratio of the level term.
    """
    x = _as_vector(series)
    n = x.size
    if lag_order < 0:
        raise RangeError("lag_order must be non-negative")
    if n < 20 + lag_order:
        raise InsufficientDataError(f"ADF with lag_order={lag_order} needs n >= {20 + lag_order}, got {n}")
    dx = np.diff(x)
    nobs = n - 1 - lag_order
    y = dx[lag_order:]
    cols = [x[lag_order:n - 1]]
    for j in range(1, lag_order + 1):
        cols.append(dx[lag_order - j:n - 1 - j])
    cols.append(np.ones(nobs))
    X = np.column_stack(cols)
    if np.linalg.matrix_rank(X) < X.shape[1]:
        raise DegenerateInputError("ADF regression matrix is singular")
    xtx_inv = np.linalg.inv(X.T @ X)
    beta = xtx_inv @ (X.T @ y)
    resid = y - X @ beta
    dof = nobs - X.shape[1]
    if dof <= 0:
        raise InsufficientDataError("no residual degrees of freedom in ADF regression")
    s2 = float(resid @ resid) / dof
    se = np.sqrt(s2 * xtx_inv[0, 0])
    if se == 0.0 or not np.isfinite(se):
        raise DegenerateInputError("zero standard error in ADF regression (perfect fit)")
    stat = float(beta[0] / se)
    return AdfResult(stat, adf_pvalue(stat, nobs), lag_order, nobs)


def difference(series, order: int = 1) -> np.ndarray:
    x = _as_vector(series)
    if order < 1 or order >= x.size:
        raise RangeError(f"difference order must satisfy 1 <= order < n={x.size}")
    return np.diff(x, n=order)


def undifference(diffs, first_value: float) -> np.ndarray:
    """Inverse of first-order differencing anchored at ``first_value``."""
    d = _as_vector(diffs)
    return np.concatenate([[first_value], first_value + np.cumsum(d)])


@dataclass(frozen=True)
class NormalizationParams:
    mean: float
    std: float

    def __post_init__(self):
        if not self.std > 0:
            raise ZeroVarianceError(f"normalization std must be positive, got {self.std}")

    def to_dict(self) -> dict:
        return {"mean": self.mean, "std": self.std}


def zscore_fit(series) -> NormalizationParams:
    # population std (ddof=0)
    x = _as_vector(series)
    if x.size == 0:
        raise EmptyDataError("cannot fit normalization on empty data")
    std = float(x.std())
    if std == 0.0:
        raise ZeroVarianceError("cannot normalize a constant series")
    return NormalizationParams(float(x.mean()), std)


def zscore_apply(series, params: NormalizationParams) -> np.ndarray:
    return (np.asarray(series, dtype=float) - params.mean) / params.std


def zscore_invert(values, params: NormalizationParams) -> np.ndarray:
    return np.asarray(values, dtype=float) * params.std + params.mean


@dataclass(frozen=True)
class DecompositionResult:
    trend: np.ndarray
    seasonal: np.ndarray
    residual: np.ndarray
    period: int

    @property
    def defined(self) -> np.ndarray:
        return ~np.isnan(self.trend)


def centered_moving_average(x: np.ndarray, period: int) -> np.ndarray:
    """Centered MA; an even window uses the 2xperiod convention with half-weight endpoints."""
    if period % 2 == 0:
        w = np.ones(period + 1)
        w[0] = w[-1] = 0.5
    else:
        w = np.ones(period)
    w /= period
    half = len(w) // 2
    out = np.full(x.size, np.nan)
    if x.size >= len(w):
        out[half:x.size - half] = np.convolve(x, w[::-1], mode="valid")
    return out


def seasonal_profile(detrended: np.ndarray, period: int, phase: np.ndarray | None = None) -> np.ndarray:
    """Per-phase mean of detrended values, re-centred to sum to zero over a cycle."""
    if phase is None:
        phase = np.arange(detrended.size) % period
    ok = ~np.isnan(detrended)
    means = np.array([detrended[ok & (phase == p)].mean() for p in range(period)])
    return means - means.mean()


def seasonal_decompose_additive(series, period: int = 12) -> DecompositionResult:
    x = _as_vector(series)
    if period < 2:
        raise RangeError("period must be at least 2")
    if x.size < 2 * period:
        raise InsufficientDataError(f"decomposition needs at least {2 * period} values, got {x.size}")
    trend = centered_moving_average(x, period)
    profile = seasonal_profile(x - trend, period)
    seasonal = profile[np.arange(x.size) % period]
    residual = x - trend - seasonal
    return DecompositionResult(trend, seasonal, residual, period)


@dataclass(frozen=True)
class BootstrapCI:
    point: float
    lower: float
    upper: float
    n_iterations: int
    alpha: float

    @property
    def width(self) -> float:
        return self.upper - self.lower

    def contains(self, value: float) -> bool:
        return self.lower <= value <= self.upper

    def to_dict(self) -> dict:
        return {"point": self.point, "lower": self.lower, "upper": self.upper,
                "n_iterations": self.n_iterations, "alpha": self.alpha}


def iteration_rngs(seed: int, n_iterations: int) -> list[np.random.Generator]:
    """One independent stream per iteration so results do not depend on scheduling."""
    return [np.random.default_rng(s) for s in np.random.SeedSequence(seed).spawn(n_iterations)]


def bootstrap_indices(n: int, n_iterations: int, seed: int) -> np.ndarray:
    out = np.empty((n_iterations, n), dtype=np.intp)
    for i, rng in enumerate(iteration_rngs(seed, n_iterations)):
        out[i] = rng.integers(0, n, size=n)
    return out


def percentile_interval(values: np.ndarray, alpha: float) -> tuple[float, float]:
    lo, hi = np.percentile(values, [100.0 * alpha / 2.0, 100.0 * (1.0 - alpha / 2.0)])
    return float(lo), float(hi)


def bootstrap_ci(sample, statistic: Callable[[np.ndarray], float] = np.mean,
                 n_iterations: int = 1000, alpha: float = 0.05, seed: int = 0) -> BootstrapCI:
    x = _as_vector(sample)
    if x.size == 0:
        raise EmptyDataError("cannot bootstrap an empty sample")
    if x.size < 2:
        raise InsufficientDataError("bootstrap needs at least 2 observations")
    if not 0.0 < alpha < 1.0:
        raise RangeError("alpha must lie in (0, 1)")
    idx = bootstrap_indices(x.size, n_iterations, seed)
    stats = np.array([statistic(x[row]) for row in idx], dtype=float)
    lo, hi = percentile_interval(stats, alpha)
    return BootstrapCI(float(statistic(x)), lo, hi, n_iterations, alpha)


def pooled_std(a, b) -> float:
    a, b = _as_vector(a), _as_vector(b)
    dof = a.size + b.size - 2
    if dof <= 0:
        return 0.0
    ss = ((a - a.mean()) ** 2).sum() + ((b - b.mean()) ** 2).sum()
    return float(np.sqrt(ss / dof))


def cohens_d(a: Sequence[float], b: Sequence[float]) -> float:
    """Standardized mean difference ``(mean(a) - mean(b)) / pooled_sd``."""
    a, b = _as_vector(a), _as_vector(b)
    if a.size == 0 or b.size == 0:
        raise EmptyDataError("cohens_d needs two non-empty samples")
    sp = pooled_std(a, b)
    if sp == 0.0:
        raise ZeroVarianceError("pooled standard deviation is zero")
    return float((a.mean() - b.mean()) / sp)
