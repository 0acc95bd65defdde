"""CSV ingestion, gap repair, IQR outlier flagging and descriptive statistics."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import asdict, dataclass, field
from typing import IO, Iterable, Mapping, NamedTuple, Sequence

import numpy as np

from .errors import (
    DuplicateRecordError,
    EmptyDataError,
    InsufficientDataError,
    RangeError,
    SchemaError,
)

DEFAULT_SCHEMA = {"year": "Year", "month": "Month", "values": {"tem": "tem", "rain": "rain"}}
DEFAULT_UNITS = {"tem": "degC", "rain": "mm"}


@dataclass(frozen=True)
class MonthlyRecord:
    year: int
    month: int
    value: float | None = None

    def __post_init__(self):
        if not 1 <= self.month <= 12:
            raise RangeError(f"month {self.month} outside 1-12 (year {self.year})")

    @property
    def missing(self) -> bool:
        return self.value is None

    @property
    def ordinal(self) -> int:
        return self.year * 12 + (self.month - 1)


@dataclass(frozen=True)
class MonthlySeries:
    variable_name: str
    unit: str
    records: tuple[MonthlyRecord, ...]

    def __post_init__(self):
        object.__setattr__(self, "records", tuple(self.records))
        for prev, cur in zip(self.records, self.records[1:]):
            if cur.ordinal != prev.ordinal + 1:
                raise RangeError(
                    f"{self.variable_name}: records {prev.year}-{prev.month:02d} and "
                    f"{cur.year}-{cur.month:02d} are not consecutive months"
                )

    def __len__(self) -> int:
        return len(self.records)

    @property
    def timestamps(self) -> list[tuple[int, int]]:
        return [(r.year, r.month) for r in self.records]

    @property
    def n_missing(self) -> int:
        return sum(r.missing for r in self.records)

    def values(self, allow_missing: bool = False) -> np.ndarray:
        """Values as float64; missing entries become NaN only when ``allow_missing``."""
        if not allow_missing and self.n_missing:
            raise EmptyDataError(f"{self.variable_name} has {self.n_missing} missing values")
        return np.array([np.nan if r.value is None else r.value for r in self.records], dtype=float)

    def with_values(self, values: Iterable[float | None]) -> "MonthlySeries":
        vals = list(values)
        if len(vals) != len(self.records):
            raise RangeError("replacement values must match the series length")
        recs = tuple(
            MonthlyRecord(r.year, r.month, None if v is None else float(v))
            for r, v in zip(self.records, vals)
        )
        return MonthlySeries(self.variable_name, self.unit, recs)

    @classmethod
    def from_values(cls, variable_name: str, values: Sequence[float | None], unit: str = "",
                    start: tuple[int, int] = (1901, 1)) -> "MonthlySeries":
        y0, m0 = start
        base = y0 * 12 + m0 - 1
        recs = []
        for i, v in enumerate(values):
            y, m = divmod(base + i, 12)
            missing = v is None or (isinstance(v, float) and math.isnan(v))
            recs.append(MonthlyRecord(y, m + 1, None if missing else float(v)))
        return cls(variable_name, unit, tuple(recs))


@dataclass
class QualityReport:
    n_total: int
    n_missing: int
    missing_fraction: float
    outlier_indices: list[int]
    valid_range: tuple[float, float]
    descriptive: dict[str, float]
    n_dropped: int = 0
    repaired_indices: list[int] = field(default_factory=list)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["valid_range"] = list(self.valid_range)
        return d

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2)


def _header_index(header: list[str], name: str) -> int:
    try:
        return header.index(name)
    except ValueError:
        raise SchemaError(f"column {name!r} not found in header {header}") from None


def _parse_float(cell: str) -> float | None:
    cell = cell.strip()
    if not cell:
        return None
    try:
        v = float(cell)
    except ValueError:
        return None
    return None if math.isnan(v) or math.isinf(v) else v


def parse_csv(source: IO[bytes] | IO[str] | bytes | str,
              schema: Mapping | None = None,
              units: Mapping[str, str] | None = None) -> dict[str, MonthlySeries]:
    """Read a monthly CSV into one ``MonthlySeries`` per mapped value column.

    ``schema`` maps ``year``/``month`` to header names and ``values`` to a
    ``{variable: header}`` dict. Value columns absent from the header are
    skipped only when the default schema is in use.
    """
    explicit = schema is not None
    schema = dict(schema or DEFAULT_SCHEMA)
    units = {**DEFAULT_UNITS, **(units or {})}
    if isinstance(source, bytes):
        text = source.decode("utf-8")
    elif isinstance(source, str):
        text = source
    else:
        raw = source.read()
        text = raw.decode("utf-8") if isinstance(raw, bytes) else raw
    text = text.lstrip("﻿")

    reader = csv.reader(io.StringIO(text))
    try:
        header = [h.strip() for h in next(reader)]
    except StopIteration:
        raise SchemaError("empty CSV: no header row") from None
    if len(set(header)) != len(header) or any(not h for h in header):
        raise SchemaError(f"malformed header {header}")
    if "year" not in schema or "month" not in schema or "values" not in schema:
        raise SchemaError("schema must map 'year', 'month' and 'values'")

    yi = _header_index(header, schema["year"])
    mi = _header_index(header, schema["month"])
    value_cols = {}
    for var, col in dict(schema["values"]).items():
        if col in header:
            value_cols[var] = header.index(col)
        elif explicit:
            raise SchemaError(f"column {col!r} for variable {var!r} not found in header {header}")
    if not value_cols:
        raise SchemaError(f"no value columns from schema found in header {header}")

    rows: dict[int, tuple[int, int, dict[str, float | None]]] = {}
    for lineno, row in enumerate(reader, start=2):
        if not row or all(not c.strip() for c in row):
            continue
        row = row + [""] * (len(header) - len(row))
        try:
            year = int(float(row[yi]))
            month = int(float(row[mi]))
        except ValueError:
            raise SchemaError(f"line {lineno}: unparseable year/month {row[yi]!r}/{row[mi]!r}") from None
        if not 1 <= month <= 12:
            raise RangeError(f"line {lineno}: month {month} outside 1-12")
        key = year * 12 + month - 1
        if key in rows:
            raise DuplicateRecordError(f"line {lineno}: duplicate record for {year}-{month:02d}")
        rows[key] = (year, month, {v: _parse_float(row[i]) for v, i in value_cols.items()})

    if not rows:
        raise EmptyDataError("CSV contains no data rows")
    first, last = min(rows), max(rows)
    out = {}
    for var in value_cols:
        recs = []
        for key in range(first, last + 1):
            y, m = divmod(key, 12)
            value = rows[key][2][var] if key in rows else None
            recs.append(MonthlyRecord(y, m + 1, value))
        out[var] = MonthlySeries(var, units.get(var, ""), tuple(recs))
    return out


def write_csv(series: Mapping[str, MonthlySeries] | Sequence[MonthlySeries],
              schema: Mapping | None = None) -> str:
    """Serialize aligned series back to CSV text; missing values become empty cells."""
    if not isinstance(series, Mapping):
        series = {s.variable_name: s for s in series}
    schema = schema or {"year": "Year", "month": "Month",
                        "values": {v: v for v in series}}
    cols = dict(schema["values"])
    names = list(series)
    stamps = series[names[0]].timestamps
    for s in series.values():
        if s.timestamps != stamps:
            raise SchemaError("series to serialize must share timestamps")
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow([schema["year"], schema["month"], *(cols.get(n, n) for n in names)])
    for i, (y, m) in enumerate(stamps):
        cells = []
        for n in names:
            v = series[n].records[i].value
            cells.append("" if v is None else repr(v))
        w.writerow([y, m, *cells])
    return buf.getvalue()


class Repair(NamedTuple):
    series: MonthlySeries
    repaired_indices: list[int]
    dropped_indices: list[int]


def interpolate_missing(series: MonthlySeries) -> Repair:
    """Linearly fill interior gaps; drop leading and trailing missing runs.

    Indices in the result refer to positions in the input series.
    """
    present = [i for i, r in enumerate(series.records) if not r.missing]
    if not present:
        raise EmptyDataError(f"{series.variable_name}: every value is missing")
    if len(present) < 2 and len(series) > 1:
        raise InsufficientDataError(f"{series.variable_name}: need at least 2 observed values")
    lo, hi = present[0], present[-1]
    dropped = list(range(lo)) + list(range(hi + 1, len(series)))
    vals = series.values(allow_missing=True)
    repaired = [i for i in range(lo, hi + 1) if series.records[i].missing]
    if repaired:
        vals[repaired] = np.interp(repaired, present, vals[present])
    kept = series.records[lo:hi + 1]
    recs = tuple(MonthlyRecord(r.year, r.month, float(vals[lo + j])) for j, r in enumerate(kept))
    return Repair(MonthlySeries(series.variable_name, series.unit, recs), repaired, dropped)


def quartiles(values: np.ndarray) -> tuple[float, float]:
    # linear interpolation between order statistics (type 7)
    q1, q3 = np.percentile(values, [25.0, 75.0])
    return float(q1), float(q3)


def descriptive_stats(series: MonthlySeries | Sequence[float]) -> dict[str, float]:
    x = series.values() if isinstance(series, MonthlySeries) else np.asarray(series, dtype=float)
    if x.size == 0:
        raise EmptyDataError("cannot describe an empty series")
    if np.isnan(x).any():
        raise EmptyDataError("series contains missing values")
    q1, q3 = quartiles(x)
    return {
        "mean": float(x.mean()),
        "std": float(x.std(ddof=1)) if x.size > 1 else 0.0,
        "min": float(x.min()),
        "q1": q1,
        "q3": q3,
        "max": float(x.max()),
    }


def detect_outliers_iqr(series: MonthlySeries | Sequence[float], k: float = 1.5) -> QualityReport:
    """Flag (never remove) values outside ``[Q1 - k*IQR, Q3 + k*IQR]``."""
    x = series.values() if isinstance(series, MonthlySeries) else np.asarray(series, dtype=float)
    if np.isnan(x).any():
        raise EmptyDataError("series contains missing values; interpolate first")
    if x.size < 4:
        raise InsufficientDataError(f"quartiles need at least 4 values, got {x.size}")
    q1, q3 = quartiles(x)
    iqr = q3 - q1
    low, high = q1 - k * iqr, q3 + k * iqr
    outliers = np.flatnonzero((x < low) | (x > high)).tolist()
    return QualityReport(
        n_total=int(x.size),
        n_missing=0,
        missing_fraction=0.0,
        outlier_indices=outliers,
        valid_range=(float(low), float(high)),
        descriptive=descriptive_stats(x),
    )


def assess_quality(series: MonthlySeries, k: float = 1.5) -> tuple[QualityReport, MonthlySeries]:
    """Full quality pass: count gaps, repair them, then flag outliers on the repaired series."""
    n_total = len(series)
    n_missing = series.n_missing
    repair = interpolate_missing(series)
    report = detect_outliers_iqr(repair.series, k)
    report.n_total = n_total
    report.n_missing = n_missing
    report.missing_fraction = n_missing / n_total if n_total else 0.0
    report.n_dropped = len(repair.dropped_indices)
    report.repaired_indices = repair.repaired_indices
    return report, repair.series
