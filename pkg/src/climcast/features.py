"""Supervised feature matrices, chronological splits and sequence windows.

Every engineered cell carries a provenance index: the position of the latest
raw observation it depends on (``-1`` for calendar-only features). A row is
leak-free when all of its provenance indices are at or before its own index.
"""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field, replace
from typing import Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .errors import InsufficientDataError, RangeError, ShapeError
from .ingest import MonthlySeries
from .stats import DecompositionResult, NormalizationParams, centered_moving_average, zscore_fit

ROLLING_STATS = ("mean", "std", "var")
CALENDAR = -1


@dataclass(frozen=True)
class FeatureSpec:
    lags: tuple[int, ...] = (1, 3, 6, 12)
    rolling_windows: tuple[int, ...] = (12,)
    rolling_stats: tuple[str, ...] = ROLLING_STATS
    cyclical_month: bool = True
    decomposition_features: bool = False
    trend_feature: bool = False
    sequence_length: int = 12
    period: int = 12

    def __post_init__(self):
        object.__setattr__(self, "lags", tuple(int(k) for k in self.lags))
        object.__setattr__(self, "rolling_windows", tuple(int(w) for w in self.rolling_windows))
        object.__setattr__(self, "rolling_stats", tuple(self.rolling_stats))
        if any(k <= 0 for k in self.lags) or len(set(self.lags)) != len(self.lags):
            raise RangeError(f"lags must be positive and distinct, got {self.lags}")
        if any(w < 2 for w in self.rolling_windows):
            raise RangeError("rolling windows must be at least 2")
        bad = set(self.rolling_stats) - set(ROLLING_STATS)
        if bad:
            raise RangeError(f"unknown rolling statistics {sorted(bad)}")
        if self.sequence_length < 1:
            raise RangeError("sequence_length must be >= 1")

    def to_dict(self) -> dict:
        return {k: list(v) if isinstance(v, tuple) else v for k, v in asdict(self).items()}


def _vector(series) -> np.ndarray:
    if isinstance(series, MonthlySeries):
        return series.values()
    return np.asarray(series, dtype=float)


def make_lag_features(series, lags: Sequence[int]) -> dict[str, np.ndarray]:
    """``lag_k[t] = x[t-k]``; rows without enough history hold NaN."""
    x = _vector(series)
    out = {}
    for k in lags:
        if k <= 0:
            raise RangeError(f"lag must be positive, got {k}")
        if k >= x.size:
            raise RangeError(f"lag {k} needs a series longer than {x.size}")
        col = np.full(x.size, np.nan)
        col[k:] = x[:-k]
        out[f"lag_{k}"] = col
    return out


def make_rolling_features(series, window: int, stats: Sequence[str] = ROLLING_STATS) -> dict[str, np.ndarray]:
    """Trailing statistics over ``x[t-w+1 .. t]`` inclusive; the first ``w-1`` rows are NaN."""
    x = _vector(series)
    if window < 2:
        raise RangeError("rolling window must be at least 2")
    if window > x.size:
        raise RangeError(f"window {window} longer than series ({x.size})")
    win = sliding_window_view(x, window)
    funcs = {
        "mean": lambda a: a.mean(axis=1),
        "std": lambda a: a.std(axis=1, ddof=1),
        "var": lambda a: a.var(axis=1, ddof=1),
    }
    out = {}
    for stat in stats:
        col = np.full(x.size, np.nan)
        col[window - 1:] = funcs[stat](win)
        out[f"roll_{stat}_{window}"] = col
    return out


def make_cyclical_month(month) -> tuple:
    m = np.asarray(month)
    if np.any((m < 1) | (m > 12)) or np.any(m != np.round(m)):
        raise RangeError(f"month must be an integer in 1-12, got {month}")
    angle = 2.0 * np.pi * m / 12.0
    s, c = np.sin(angle), np.cos(angle)
    if m.ndim == 0:
        return float(s), float(c)
    return s, c


def make_trend_feature(n_rows: int, span: int | None = None) -> np.ndarray:
    """``t / (span - 1)`` with ``span`` defaulting to ``n_rows``; forecasts pass the fitted span."""
    if n_rows < 1:
        raise RangeError("n_rows must be >= 1")
    span = n_rows if span is None else span
    if span <= 1:
        return np.zeros(n_rows)
    return np.arange(n_rows) / (span - 1)


def causal_decomposition_features(series, months, period: int = 12):
    """Trend and seasonal features for each index using only strictly earlier values.

    At index ``t`` the latest centred moving average computable from
    ``x[:t]`` sits at ``t-1-period//2``; the seasonal profile is the
    zero-sum per-month mean of the detrended values available up to that
    same point. Returns ``(trend, seasonal, trend_src, seasonal_src)``
    where the ``*_src`` arrays give provenance indices.
    """
    x = np.asarray(series, dtype=float)
    phase = np.asarray(months, dtype=int) - 1 if period == 12 else np.arange(x.size) % period
    n = x.size
    h = period // 2
    cma = centered_moving_average(x, period)
    detr = x - cma
    trend = np.full(n, np.nan)
    seasonal = np.full(n, np.nan)
    sums = np.zeros(period)
    counts = np.zeros(period)
    last = -1  # last detrended index folded into sums
    for t in range(n):
        s = t - 1 - h
        if s < h:
            continue
        trend[t] = cma[s]
        while last < s:
            last += 1
            if not np.isnan(detr[last]):
                sums[phase[last]] += detr[last]
                counts[phase[last]] += 1
        if np.all(counts > 0):
            means = sums / counts
            seasonal[t] = means[phase[t]] - means.mean()
    src = np.arange(n) - 1
    return trend, seasonal, src, src.copy()


@dataclass
class FeatureMatrix:
    column_names: list[str]
    rows: np.ndarray
    targets: np.ndarray
    timestamps: list[tuple[int, int]]
    row_index: np.ndarray
    provenance: np.ndarray
    normalization: dict[str, NormalizationParams] = field(default_factory=dict)
    spec: FeatureSpec | None = None

    def __post_init__(self):
        n = len(self.targets)
        if self.rows.shape[0] != n or len(self.timestamps) != n or len(self.row_index) != n:
            raise ShapeError("rows, targets, timestamps and row_index must share a length")
        if self.rows.shape[1] != len(self.column_names):
            raise ShapeError("column_names must match the number of feature columns")

    def __len__(self) -> int:
        return len(self.targets)

    @property
    def n_features(self) -> int:
        return len(self.column_names)

    @property
    def normalized(self) -> bool:
        return "target" in self.normalization

    def subset(self, start: int, stop: int) -> "FeatureMatrix":
        return replace(
            self,
            rows=self.rows[start:stop],
            targets=self.targets[start:stop],
            timestamps=self.timestamps[start:stop],
            row_index=self.row_index[start:stop],
            provenance=self.provenance[start:stop],
            normalization=dict(self.normalization),
        )

    def physical_targets(self) -> np.ndarray:
        if not self.normalized:
            return self.targets.copy()
        p = self.normalization["target"]
        return self.targets * p.std + p.mean

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["year", "month", *self.column_names, "target"])
        for (y, m), row, tgt in zip(self.timestamps, self.rows, self.targets):
            w.writerow([y, m, *(repr(float(v)) for v in row), repr(float(tgt))])
        return buf.getvalue()

    def sidecar(self) -> dict:
        return {
            "column_names": list(self.column_names),
            "normalization": {k: v.to_dict() for k, v in self.normalization.items()},
            "spec": self.spec.to_dict() if self.spec else None,
            "first_timestamp": list(self.timestamps[0]) if len(self) else None,
            "last_timestamp": list(self.timestamps[-1]) if len(self) else None,
        }

    def sidecar_json(self) -> str:
        return json.dumps(self.sidecar(), indent=2)


def _series_arrays(series) -> tuple[np.ndarray, list[tuple[int, int]]]:
    if isinstance(series, MonthlySeries):
        return series.values(allow_missing=True), series.timestamps
    x = np.asarray(series, dtype=float)
    stamps = MonthlySeries.from_values("x", [0.0] * x.size).timestamps
    return x, stamps


def assemble(series, spec: FeatureSpec | None = None,
             decomposition: DecompositionResult | None = None,
             trend_span: int | None = None) -> FeatureMatrix:
    """Join the requested feature columns and keep rows where every feature exists.

    Target at row ``t`` is ``x[t]``. Lag and rolling features only look at
    ``x[:t]`` (rolling windows are evaluated on the series shifted by one
    month). Decomposition features are computed causally unless an explicit
    ``decomposition`` is supplied; a full-series decomposition depends on
    later values, and its provenance says so, which the leakage audit flags.
    """
    spec = spec or FeatureSpec()
    x, stamps = _series_arrays(series)
    n = x.size
    if np.isnan(x).any():
        raise InsufficientDataError("assemble needs a gap-free series; interpolate first")
    idx = np.arange(n)
    months = np.array([m for _, m in stamps])

    cols: dict[str, np.ndarray] = {}
    src: dict[str, np.ndarray] = {}

    if spec.lags:
        for name, col in make_lag_features(x, spec.lags).items():
            cols[name] = col
            src[name] = idx - int(name.split("_")[1])

    shifted = np.concatenate([[np.nan], x[:-1]])
    for w in spec.rolling_windows:
        if w + 1 > n:
            raise RangeError(f"window {w} longer than the available history ({n - 1})")
        for name, col in make_rolling_features(shifted, w, spec.rolling_stats).items():
            cols[name] = col
            src[name] = idx - 1

    if spec.cyclical_month:
        s, c = make_cyclical_month(months)
        cols["month_sin"], cols["month_cos"] = s, c
        src["month_sin"] = src["month_cos"] = np.full(n, CALENDAR)

    if spec.decomposition_features:
        if decomposition is None:
            tr, se, tsrc, ssrc = causal_decomposition_features(x, months, spec.period)
        else:
            if len(decomposition.trend) != n:
                raise ShapeError("decomposition length does not match the series")
            tr, se = decomposition.trend, decomposition.seasonal
            tsrc = np.minimum(idx + decomposition.period // 2, n - 1)
            ssrc = np.full(n, n - 1)
        cols["decomp_trend"], cols["decomp_seasonal"] = tr, se
        src["decomp_trend"], src["decomp_seasonal"] = tsrc, ssrc

    if spec.trend_feature:
        cols["trend_index"] = make_trend_feature(n, trend_span)
        src["trend_index"] = np.full(n, CALENDAR)

    names = list(cols)
    if names:
        mat = np.column_stack([cols[k] for k in names])
        prov = np.column_stack([src[k] for k in names]).astype(np.int64)
    else:
        mat = np.empty((n, 0))
        prov = np.empty((n, 0), dtype=np.int64)
    usable = ~np.isnan(mat).any(axis=1)
    if not usable.any():
        raise InsufficientDataError("no usable feature rows for this spec and series length")
    keep = np.flatnonzero(usable)
    return FeatureMatrix(
        column_names=names,
        rows=mat[keep],
        targets=x[keep].copy(),
        timestamps=[stamps[i] for i in keep],
        row_index=keep,
        provenance=prov[keep],
        spec=spec,
    )


def audit_provenance(matrix: FeatureMatrix) -> list[tuple[int, str]]:
    """Return ``(row, column)`` pairs whose features depend on later observations."""
    bad = np.argwhere(matrix.provenance > matrix.row_index[:, None])
    return [(int(r), matrix.column_names[c]) for r, c in bad]


def split_sizes(n: int, fractions=(0.70, 0.15, 0.15)) -> tuple[int, int, int]:
    """Round-half-up train and validation counts; the remainder goes to test."""
    if len(fractions) != 3 or not math.isclose(sum(fractions), 1.0, abs_tol=1e-9):
        raise RangeError(f"fractions must be three values summing to 1, got {fractions}")
    n_train = int(math.floor(fractions[0] * n + 0.5))
    n_val = int(math.floor(fractions[1] * n + 0.5))
    n_test = n - n_train - n_val
    if min(n_train, n_val, n_test) <= 0:
        raise InsufficientDataError(f"{n} rows cannot fill a {fractions} split")
    return n_train, n_val, n_test


@dataclass
class SequenceDataset:
    X: np.ndarray          # (N, T, F)
    y: np.ndarray          # (N,)
    timestamps: list[tuple[int, int]]
    target_params: NormalizationParams | None = None

    def __len__(self) -> int:
        return len(self.y)

    def physical_targets(self) -> np.ndarray:
        if self.target_params is None:
            return self.y.copy()
        return self.y * self.target_params.std + self.target_params.mean


def window_sequences(matrix: FeatureMatrix, T: int, history: FeatureMatrix | None = None) -> SequenceDataset:
    """Sample ``i`` is rows ``[i-T+1 .. i]`` with target ``i``.

    ``history`` is the matrix immediately preceding ``matrix`` in time; when
    given, its trailing rows seed the first windows so every row of
    ``matrix`` yields a sample. Windows never reach forward in time.
    """
    if T < 1:
        raise RangeError("sequence length must be >= 1")
    rows, targets = matrix.rows, matrix.targets
    offset = 0
    if history is not None and T > 1 and len(history):
        if history.row_index[-1] + 1 != matrix.row_index[0]:
            raise ShapeError("history must immediately precede the matrix in time")
        ctx = history.rows[-(T - 1):]
        rows = np.vstack([ctx, rows])
        offset = len(ctx)
    if T > len(rows):
        raise RangeError(f"sequence length {T} exceeds the {len(rows)} available rows")
    win = sliding_window_view(rows, T, axis=0)          # (N, F, T)
    X = np.ascontiguousarray(win.transpose(0, 2, 1))
    first = T - 1 - offset                              # first target row in ``matrix``
    y = targets[first:]
    stamps = matrix.timestamps[first:]
    tp = matrix.normalization.get("target")
    return SequenceDataset(X, y.copy(), list(stamps), tp)


@dataclass
class SplitDataset:
    train: FeatureMatrix
    validation: FeatureMatrix
    test: FeatureMatrix

    @property
    def target_params(self) -> NormalizationParams:
        return self.train.normalization["target"]

    def sequences(self, T: int) -> tuple[SequenceDataset, SequenceDataset, SequenceDataset]:
        tr = window_sequences(self.train, T)
        va = window_sequences(self.validation, T, history=self.train)
        both = _concat(self.train, self.validation)
        te = window_sequences(self.test, T, history=both)
        return tr, va, te


def _concat(a: FeatureMatrix, b: FeatureMatrix) -> FeatureMatrix:
    return replace(
        a,
        rows=np.vstack([a.rows, b.rows]),
        targets=np.concatenate([a.targets, b.targets]),
        timestamps=a.timestamps + b.timestamps,
        row_index=np.concatenate([a.row_index, b.row_index]),
        provenance=np.vstack([a.provenance, b.provenance]),
    )


def normalize_with(matrix: FeatureMatrix, params: dict[str, NormalizationParams]) -> FeatureMatrix:
    cols = [params[c] for c in matrix.column_names]
    mu = np.array([p.mean for p in cols])
    sd = np.array([p.std for p in cols])
    tp = params["target"]
    return replace(
        matrix,
        rows=(matrix.rows - mu) / sd if cols else matrix.rows.copy(),
        targets=(matrix.targets - tp.mean) / tp.std,
        normalization=dict(params),
    )


# already on fixed bounded scales; z-scoring the time index with train-only
# statistics would push every test row several deviations out of range
PASSTHROUGH_COLUMNS = ("month_sin", "month_cos", "trend_index")
IDENTITY = NormalizationParams(0.0, 1.0)


def fit_normalization(matrix: FeatureMatrix) -> dict[str, NormalizationParams]:
    params = {}
    for j, name in enumerate(matrix.column_names):
        if name in PASSTHROUGH_COLUMNS:
            params[name] = IDENTITY
            continue
        try:
            params[name] = zscore_fit(matrix.rows[:, j])
        except Exception as exc:
            raise type(exc)(f"feature column {name!r}: {exc}") from None
    params["target"] = zscore_fit(matrix.targets)
    return params


def temporal_split(matrix: FeatureMatrix, fractions=(0.70, 0.15, 0.15),
                   normalization: dict[str, NormalizationParams] | None = None) -> SplitDataset:
    """Contiguous chronological split, z-scored with statistics of the training slice.

    Pass ``normalization`` to reuse parameters fitted elsewhere (for example
    a model trained on a shifted region being tested on original data).
    """
    if matrix.normalized:
        raise ShapeError("temporal_split expects an unnormalized matrix")
    n_train, n_val, _ = split_sizes(len(matrix), fractions)
    train = matrix.subset(0, n_train)
    val = matrix.subset(n_train, n_train + n_val)
    test = matrix.subset(n_train + n_val, len(matrix))
    params = normalization or fit_normalization(train)
    return SplitDataset(normalize_with(train, params), normalize_with(val, params), normalize_with(test, params))
