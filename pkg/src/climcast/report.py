"""JSON reports and CSV plot series.

Plot series columns:

    acf                  lag, rho, bound_upper, bound_lower
    rolling_stats        year, month, value, roll_mean_<w>, roll_std_<w>
    lag_overlay          year, month, value, lag_<k> ...
    actual_vs_predicted  year, month, actual, predicted      (one row per test sample)
    residuals            year, month, actual, predicted, residual   (residual = actual - predicted)
    history              epoch, train_mse, val_mse
"""

from __future__ import annotations

import csv
import io
import json
import math
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np

from .errors import ArtifactIOError, ShapeError
from .evaluation import residual_series
from .features import make_lag_features
from .stats import acf

REPORT_FORMAT_VERSION = 1


def _jsonable(obj: Any) -> Any:
    if hasattr(obj, "to_dict"):
        return _jsonable(obj.to_dict())
    if isinstance(obj, Mapping):
        return {str(k): _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [_jsonable(v) for v in obj.tolist()]
    if isinstance(obj, np.generic):
        return _jsonable(obj.item())
    if isinstance(obj, float) and not math.isfinite(obj):
        return None
    return obj


def dumps(obj: Any) -> str:
    """Deterministic JSON: insertion-ordered keys, non-finite floats as null."""
    return json.dumps(_jsonable(obj), indent=2, allow_nan=False) + "\n"


def write_text(path, text: str) -> Path:
    path = Path(path)
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(text, encoding="utf-8")
    except OSError as exc:
        raise ArtifactIOError(path, exc.strerror or str(exc)) from exc
    return path


def read_text(path) -> str:
    path = Path(path)
    try:
        return path.read_text(encoding="utf-8")
    except OSError as exc:
        raise ArtifactIOError(path, exc.strerror or str(exc)) from exc


def emit_report(results: Sequence[Any], path=None, meta: Mapping | None = None) -> str:
    """Collect results (dicts or objects with ``to_dict``) into one JSON document."""
    doc = {"format_version": REPORT_FORMAT_VERSION, "meta": dict(meta or {}),
           "results": [_jsonable(r) for r in results]}
    text = dumps(doc)
    if path is not None:
        write_text(path, text)
    return text


def emit_plot_series(name: str, columns: Mapping[str, Sequence], directory=None) -> str:
    """Write equal-length named columns as CSV; to ``directory/<name>.csv`` when given."""
    cols = {k: list(v) for k, v in columns.items()}
    lengths = {len(v) for v in cols.values()}
    if len(lengths) > 1:
        raise ShapeError(f"plot series {name!r} has columns of unequal length {sorted(lengths)}")
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(list(cols))
    for row in zip(*cols.values()):
        w.writerow([_cell(v) for v in row])
    text = buf.getvalue()
    if directory is not None:
        write_text(Path(directory) / f"{name}.csv", text)
    return text


def _cell(v):
    if isinstance(v, (float, np.floating)):
        return "" if not np.isfinite(v) else repr(float(v))
    if isinstance(v, np.integer):
        return int(v)
    return v


def _stamps(series):
    return [t[0] for t in series.timestamps], [t[1] for t in series.timestamps]


def acf_columns(series, max_lag: int = 36) -> dict:
    res = acf(series, max_lag)
    lags = list(range(len(res.rho)))
    return {"lag": lags, "rho": res.rho.tolist(),
            "bound_upper": [res.significance_bound] * len(lags),
            "bound_lower": [-res.significance_bound] * len(lags)}


def rolling_columns(series, window: int = 12) -> dict:
    """Trailing window stats including the current month (display only)."""
    x = series.values()
    years, months = _stamps(series)
    mean = np.full(len(x), np.nan)
    std = np.full(len(x), np.nan)
    if len(x) >= window:
        view = np.lib.stride_tricks.sliding_window_view(x, window)
        mean[window - 1:] = view.mean(axis=1)
        std[window - 1:] = view.std(axis=1, ddof=1) if window > 1 else 0.0
    return {"year": years, "month": months, "value": x.tolist(),
            f"roll_mean_{window}": mean.tolist(), f"roll_std_{window}": std.tolist()}


def lag_overlay_columns(series, lags=(1, 12)) -> dict:
    years, months = _stamps(series)
    cols = {"year": years, "month": months, "value": series.values().tolist()}
    cols.update({k: v.tolist() for k, v in make_lag_features(series, lags).items()})
    return cols


def actual_vs_predicted_columns(pred, actual, timestamps) -> dict:
    rows = residual_series(pred, actual, timestamps)
    return {"year": [r["year"] for r in rows], "month": [r["month"] for r in rows],
            "actual": [r["actual"] for r in rows], "predicted": [r["predicted"] for r in rows]}


def residual_columns(pred, actual, timestamps) -> dict:
    rows = residual_series(pred, actual, timestamps)
    return {k: [r[k] for r in rows] for k in ("year", "month", "actual", "predicted", "residual")}


def emit_standard_plots(directory, series=None, pred=None, actual=None, timestamps=None,
                        max_lag: int = 36, window: int = 12, lags=(1, 12)) -> list[str]:
    """Write every plot series the inputs allow; returns the names written."""
    written = []
    if series is not None:
        emit_plot_series("acf", acf_columns(series, min(max_lag, len(series) - 1)), directory)
        emit_plot_series("rolling_stats", rolling_columns(series, window), directory)
        emit_plot_series("lag_overlay", lag_overlay_columns(series, lags), directory)
        written += ["acf", "rolling_stats", "lag_overlay"]
    if pred is not None:
        emit_plot_series("actual_vs_predicted", actual_vs_predicted_columns(pred, actual, timestamps), directory)
        emit_plot_series("residuals", residual_columns(pred, actual, timestamps), directory)
        written += ["actual_vs_predicted", "residuals"]
    return written
