"""Point metrics, bootstrap intervals, extreme-event strata, residuals and model comparison."""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import DegenerateInputError, RangeError, ShapeError
from .stats import BootstrapCI, NormalizationParams, cohens_d, iteration_rngs, percentile_interval

METRIC_UNITS = {
    "mse_normalized": "normalized^2",
    "mse": "unit^2",
    "rmse": "unit",
    "mae": "unit",
    "r2": "dimensionless",
    "nrmse": "fraction of data range",
}


def _pair(pred, actual) -> tuple[np.ndarray, np.ndarray]:
    p = np.asarray(pred, dtype=float).ravel()
    a = np.asarray(actual, dtype=float).ravel()
    if p.shape != a.shape:
        raise ShapeError(f"pred has {p.size} values, actual has {a.size}")
    return p, a


def evaluate(pred, actual, data_range: float | None = None) -> dict[str, float]:
    """MSE, RMSE, MAE, R^2 and range-normalized RMSE."""
    p, a = _pair(pred, actual)
    if a.size < 2:
        raise RangeError("evaluate needs at least 2 points")
    if data_range is None:
        data_range = float(a.max() - a.min())
    if data_range <= 0:
        raise DegenerateInputError("data range of the actuals is zero")
    e = a - p
    mse = float(np.mean(e * e))
    ss_tot = float(np.sum((a - a.mean()) ** 2))
    if ss_tot == 0.0:
        raise DegenerateInputError("actuals are constant; R^2 is undefined")
    rmse = float(np.sqrt(mse))
    return {
        "mse": mse,
        "rmse": rmse,
        "mae": float(np.mean(np.abs(e))),
        "r2": 1.0 - float(np.sum(e * e)) / ss_tot,
        "nrmse": rmse / data_range,
    }


def _resample_metrics(P: np.ndarray, A: np.ndarray) -> dict[str, np.ndarray]:
    E = A - P
    mse = np.mean(E * E, axis=1)
    ss_tot = np.sum((A - A.mean(axis=1, keepdims=True)) ** 2, axis=1)
    rmse = np.sqrt(mse)
    return {
        "mse": mse,
        "rmse": rmse,
        "mae": np.mean(np.abs(E), axis=1),
        "r2": 1.0 - E.shape[1] * mse / ss_tot,
    }


@dataclass
class MetricsReport:
    metrics: dict[str, BootstrapCI]
    units: dict[str, str]
    n: int
    residuals: np.ndarray
    degenerate_redraws: int = 0
    extreme_breakdown: dict | None = None
    label: str = ""

    def point(self, name: str) -> float:
        return self.metrics[name].point

    def to_dict(self) -> dict:
        return {
            "label": self.label,
            "n": self.n,
            "metrics": {
                k: {**ci.to_dict(), "unit": self.units.get(k, "")} for k, ci in self.metrics.items()
            },
            "degenerate_redraws": self.degenerate_redraws,
            "extreme_breakdown": self.extreme_breakdown,
            "residual_summary": {
                "mean": float(np.mean(self.residuals)),
                "std": float(np.std(self.residuals, ddof=1)) if self.residuals.size > 1 else 0.0,
                "min": float(np.min(self.residuals)),
                "max": float(np.max(self.residuals)),
            },
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def metrics_with_ci(pred, actual, n_boot: int = 1000, alpha: float = 0.05, seed: int = 0,
                    target_params: NormalizationParams | None = None, unit: str = "",
                    data_range: float | None = None, max_redraws: int = 100) -> MetricsReport:
    """Point metrics with percentile bootstrap intervals over jointly resampled pairs.

    Resamples whose actuals are constant (R^2 undefined) are redrawn from the
    same iteration stream and counted. NRMSE divides every resample by the
    range of the full evaluation set. With ``target_params`` the report also
    carries MSE in normalized units.
    """
    p, a = _pair(pred, actual)
    point = evaluate(p, a, data_range)
    n = a.size
    idx = np.empty((n_boot, n), dtype=np.intp)
    redraws = 0
    for i, rng in enumerate(iteration_rngs(seed, n_boot)):
        for _ in range(max_redraws + 1):
            row = rng.integers(0, n, size=n)
            if np.ptp(a[row]) > 0:
                break
            redraws += 1
        else:
            raise DegenerateInputError("could not draw a non-degenerate bootstrap resample")
        idx[i] = row
    boot = _resample_metrics(p[idx], a[idx])
    # the bootstrap is inconsistent for sample extremes, so the range stays fixed
    scale = data_range if data_range is not None else float(a.max() - a.min())
    boot["nrmse"] = boot["rmse"] / scale
    metrics = {}
    units = {}
    for k in ("mse", "rmse", "mae", "r2", "nrmse"):
        lo, hi = percentile_interval(boot[k], alpha)
        metrics[k] = BootstrapCI(point[k], lo, hi, n_boot, alpha)
        units[k] = METRIC_UNITS[k].replace("unit", unit or "unit")
    if target_params is not None:
        s2 = target_params.std ** 2
        lo, hi = percentile_interval(boot["mse"] / s2, alpha)
        metrics = {"mse_normalized": BootstrapCI(point["mse"] / s2, lo, hi, n_boot, alpha), **metrics}
        units = {"mse_normalized": METRIC_UNITS["mse_normalized"], **units}
    return MetricsReport(metrics, units, n, a - p, redraws)


def _band_stats(e: np.ndarray) -> tuple[float | None, float | None]:
    if e.size == 0:
        return None, None
    return float(np.mean(e * e)), float(np.mean(np.abs(e)))


def _degradation(value, base) -> float | None:
    if value is None or base is None or base == 0:
        return None
    return 100.0 * (value - base) / base


def stratify_extremes(pred, actual, thresholds=(90, 95, 99)) -> dict:
    """Error breakdown by percentile band of the actuals.

    ``bands`` are disjoint (normal below the lowest threshold, then one band
    per threshold interval) so their counts sum to the sample size;
    ``exceedance`` lists the cumulative ``>= p``-th percentile groups.
    Degradations are percentage changes relative to the normal band.
    """
    p, a = _pair(pred, actual)
    ths = sorted(float(t) for t in thresholds)
    if not ths or any(not 0 < t < 100 for t in ths):
        raise RangeError("thresholds must be percentiles strictly between 0 and 100")
    cuts = np.percentile(a, ths)
    e = a - p
    normal = a < cuts[0]
    base_mse, base_mae = _band_stats(e[normal])

    def row(label, mask, low, high):
        mse, mae = _band_stats(e[mask])
        return {
            "label": label, "threshold_low": low, "threshold_high": high, "count": int(mask.sum()),
            "mse": mse, "mae": mae,
            "mse_degradation_pct": _degradation(mse, base_mse),
            "mae_degradation_pct": _degradation(mae, base_mae),
        }

    bands = [row(f"<{ths[0]:g}th", normal, None, float(cuts[0]))]
    for j, t in enumerate(ths):
        hi = float(cuts[j + 1]) if j + 1 < len(ths) else None
        mask = a >= cuts[j] if hi is None else (a >= cuts[j]) & (a < cuts[j + 1])
        label = f">={t:g}th" if hi is None else f"{t:g}th-{ths[j + 1]:g}th"
        bands.append(row(label, mask, float(cuts[j]), hi))
    exceed = [row(f">={t:g}th", a >= c, float(c), None) for t, c in zip(ths, cuts)]
    return {"thresholds": ths, "cutoffs": [float(c) for c in cuts], "n": int(a.size),
            "bands": bands, "exceedance": exceed}


def extreme_mse_ratio(breakdown: dict, threshold: float) -> float:
    """MSE of the ``>= threshold`` group divided by the normal-band MSE."""
    normal = breakdown["bands"][0]["mse"]
    for r in breakdown["exceedance"]:
        if r["label"] == f">={float(threshold):g}th":
            return r["mse"] / normal
    raise KeyError(threshold)


def residual_series(pred, actual, timestamps) -> list[dict]:
    """Rows of (year, month, actual, predicted, residual) with residual = actual - predicted."""
    p, a = _pair(pred, actual)
    if len(timestamps) != a.size:
        raise ShapeError("timestamps must align with predictions")
    return [
        {"year": int(y), "month": int(m), "actual": float(av), "predicted": float(pv), "residual": float(av - pv)}
        for (y, m), av, pv in zip(timestamps, a, p)
    ]


def compare_models(report_a: MetricsReport, report_b: MetricsReport,
                   errors_a, errors_b) -> dict:
    """Percentage MSE change of B relative to A and Cohen's d over absolute errors (exploratory)."""
    ea = np.abs(np.asarray(errors_a, dtype=float))
    eb = np.abs(np.asarray(errors_b, dtype=float))
    if ea.shape != eb.shape:
        raise ShapeError("error samples must come from the same test set")
    mse_a, mse_b = report_a.point("mse"), report_b.point("mse")
    return {
        "delta_mse_pct": 100.0 * (mse_b - mse_a) / mse_a,
        "cohens_d": cohens_d(ea, eb),
        "note": "exploratory effect size over per-sample absolute errors",
    }
