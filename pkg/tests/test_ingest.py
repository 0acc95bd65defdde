import io
import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from climcast.errors import (
    DuplicateRecordError,
    EmptyDataError,
    InsufficientDataError,
    RangeError,
    SchemaError,
)
from climcast.ingest import (
    MonthlyRecord,
    MonthlySeries,
    assess_quality,
    descriptive_stats,
    detect_outliers_iqr,
    interpolate_missing,
    parse_csv,
    write_csv,
)

CSV3 = "Year,Month,tem,rain\n1901,1,16.9,18.5\n1901,2,19.4,21.7\n1901,3,23.6,\n"


def series(vals, name="tem"):
    return MonthlySeries.from_values(name, vals, "degC")


# ---- parse_csv -------------------------------------------------------------

def test_parse_two_series_of_length_three():
    out = parse_csv(CSV3.encode())
    assert set(out) == {"tem", "rain"}
    assert len(out["tem"]) == 3 and len(out["rain"]) == 3
    assert out["tem"].unit == "degC" and out["rain"].unit == "mm"


def test_parse_empty_cell_is_missing_marker():
    rain = parse_csv(CSV3)["rain"]
    assert rain.records[2].value is None
    assert rain.records[2].missing
    assert rain.n_missing == 1


def test_parse_sorts_rows_chronologically():
    rows = [(1902, 2, 5.0), (1901, 12, 3.0), (1902, 1, 4.0), (1901, 11, 2.0)]
    text = "Year,Month,tem\n" + "".join(f"{y},{m},{v}\n" for y, m, v in rows)
    s = parse_csv(io.StringIO(text))["tem"]
    reference = sorted(rows)
    assert s.timestamps == [(y, m) for y, m, _ in reference]
    assert [r.value for r in s.records] == [v for *_, v in reference]


def test_parse_accepts_byte_stream_and_bom():
    s = parse_csv(io.BytesIO(("﻿" + CSV3).encode("utf-8")))["tem"]
    assert s.records[0].value == 16.9


def test_parse_omitted_month_becomes_missing_record():
    s = parse_csv("Year,Month,tem\n1901,1,1\n1901,3,3\n")["tem"]
    assert s.timestamps == [(1901, 1), (1901, 2), (1901, 3)]
    assert s.records[1].missing


def test_parse_unparseable_value_is_missing():
    s = parse_csv("Year,Month,tem\n1901,1,abc\n1901,2,NA\n1901,3,2.5\n")["tem"]
    assert [r.value for r in s.records] == [None, None, 2.5]


def test_parse_duplicate_names_the_line():
    text = "Year,Month,tem\n1901,1,1\n1901,2,2\n1901,1,3\n"
    with pytest.raises(DuplicateRecordError, match="line 4"):
        parse_csv(text)


def test_parse_month_out_of_range():
    with pytest.raises(RangeError):
        parse_csv("Year,Month,tem\n1901,13,1\n")


@pytest.mark.parametrize("text", ["", "Year,Year,tem\n1901,1,1\n", "Foo,Month,tem\n1,1,1\n",
                                  "Year,Month,other\n1901,1,1\n"])
def test_parse_malformed_header(text):
    with pytest.raises(SchemaError):
        parse_csv(text)


def test_parse_custom_schema():
    text = "yr,mo,temperature\n2000,5,30.5\n2000,6,31.0\n"
    schema = {"year": "yr", "month": "mo", "values": {"tem": "temperature"}}
    s = parse_csv(text, schema)["tem"]
    assert s.timestamps[0] == (2000, 5)


def test_parse_serialize_parse_round_trip():
    rng = np.random.default_rng(3)
    vals = list(rng.normal(25, 3, 30))
    vals[7] = None
    a = parse_csv(write_csv({"tem": series(vals)}))["tem"]
    b = parse_csv(write_csv({"tem": a}))["tem"]
    assert a.records == b.records
    assert a.records == series(vals).records


# ---- domain types ----------------------------------------------------------

def test_record_rejects_bad_month():
    with pytest.raises(RangeError):
        MonthlyRecord(1901, 0, 1.0)


def test_series_rejects_gaps():
    recs = (MonthlyRecord(1901, 1, 1.0), MonthlyRecord(1901, 3, 2.0))
    with pytest.raises(RangeError):
        MonthlySeries("tem", "degC", recs)


def test_values_refuses_missing_unless_allowed():
    s = series([1.0, None, 3.0])
    with pytest.raises(EmptyDataError):
        s.values()
    assert math.isnan(s.values(allow_missing=True)[1])


# ---- interpolate_missing ---------------------------------------------------

def test_interpolate_midpoint():
    rep = interpolate_missing(series([10, None, 14]))
    assert rep.series.values().tolist() == [10, 12, 14]
    assert rep.repaired_indices == [1]


def test_interpolate_constant_neighbours():
    rep = interpolate_missing(series([5, 5, None, None, 5]))
    assert rep.series.values().tolist() == [5, 5, 5, 5, 5]


def test_interpolate_two_gap_line():
    # line through (0, 0) and (3, 9) evaluated at 1 and 2
    rep = interpolate_missing(series([0, None, None, 9]))
    np.testing.assert_allclose(rep.series.values(), [0, 3, 6, 9], atol=1e-12)


def test_interpolate_drops_edges_and_reports_them():
    rep = interpolate_missing(series([None, 1, None, 3, None, None]))
    assert rep.dropped_indices == [0, 4, 5]
    assert rep.series.values().tolist() == [1, 2, 3]
    assert rep.series.timestamps[0] == (1901, 2)


def test_interpolate_all_missing():
    with pytest.raises(EmptyDataError):
        interpolate_missing(series([None, None]))


@settings(max_examples=60, deadline=None)
@given(st.lists(st.one_of(st.none(), st.floats(-50, 50)), min_size=3, max_size=40))
def test_interpolate_idempotent_and_keeps_observed(vals):
    if sum(v is not None for v in vals) < 2:
        return
    once = interpolate_missing(series(vals))
    twice = interpolate_missing(once.series)
    assert once.series.records == twice.series.records
    assert twice.repaired_indices == [] and twice.dropped_indices == []
    lo = next(i for i, v in enumerate(vals) if v is not None)
    for j, r in enumerate(once.series.records):
        if vals[lo + j] is not None:
            assert r.value == vals[lo + j]


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(-100, 100), min_size=3, max_size=30), st.data())
def test_single_interior_gap_is_neighbour_mean(vals, data):
    i = data.draw(st.integers(1, len(vals) - 2))
    holed = list(vals)
    holed[i] = None
    out = interpolate_missing(series(holed)).series.values()
    assert out[i] == pytest.approx((vals[i - 1] + vals[i + 1]) / 2, abs=1e-12)


# ---- outliers and descriptive stats ----------------------------------------

def test_iqr_flags_hand_computed_outlier():
    # type-7 quartiles of [1,2,3,4,100]: Q1 = 2, Q3 = 4, fences -1 and 7
    rep = detect_outliers_iqr([1, 2, 3, 4, 100])
    assert rep.outlier_indices == [4]
    assert rep.valid_range == (-1.0, 7.0)


def test_iqr_constant_series_has_no_outliers():
    assert detect_outliers_iqr([7, 7, 7, 7]).outlier_indices == []


def test_iqr_inside_fences_is_clean():
    assert detect_outliers_iqr([10, 11, 12, 13, 14, 15]).outlier_indices == []


def test_iqr_needs_four_values():
    with pytest.raises(InsufficientDataError):
        detect_outliers_iqr([1, 2, 3])


def test_outliers_flagged_not_removed():
    s = series([1, 2, 3, 4, 100])
    rep, cleaned = assess_quality(s)
    assert rep.outlier_indices == [4]
    assert cleaned.values().tolist() == [1, 2, 3, 4, 100]


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(-1e3, 1e3), min_size=4, max_size=50),
       st.floats(0.1, 3.0), st.floats(0.1, 3.0))
def test_outlier_set_monotone_in_k(vals, k1, k2):
    lo, hi = sorted((k1, k2))
    assert set(detect_outliers_iqr(vals, hi).outlier_indices) <= set(detect_outliers_iqr(vals, lo).outlier_indices)


def test_descriptive_two_points():
    d = descriptive_stats([2, 4])
    assert (d["mean"], d["min"], d["max"]) == (3, 2, 4)


def test_descriptive_constant_has_zero_std():
    assert descriptive_stats([5, 5, 5])["std"] == 0


def test_descriptive_matches_streaming_recomputation():
    x = np.random.default_rng(11).normal(20, 5, 1000)
    # Welford single pass
    n, mean, m2 = 0, 0.0, 0.0
    lo, hi = math.inf, -math.inf
    for v in x:
        n += 1
        delta = v - mean
        mean += delta / n
        m2 += delta * (v - mean)
        lo, hi = min(lo, v), max(hi, v)
    d = descriptive_stats(x)
    assert d["mean"] == pytest.approx(mean, rel=1e-9)
    assert d["std"] == pytest.approx(math.sqrt(m2 / (n - 1)), rel=1e-9)
    assert (d["min"], d["max"]) == (lo, hi)


def test_descriptive_empty():
    with pytest.raises(EmptyDataError):
        descriptive_stats([])


def test_quality_report_json_fields():
    rep, _ = assess_quality(series([1, None, 3, 4, 5, 6, None]))
    doc = json.loads(rep.to_json())
    for key in ("n_total", "n_missing", "missing_fraction", "outlier_indices", "valid_range", "descriptive"):
        assert key in doc
    assert doc["n_total"] == 7 and doc["n_missing"] == 2
    assert doc["missing_fraction"] == pytest.approx(2 / 7)
    assert doc["n_dropped"] == 1 and doc["repaired_indices"] == [1]
    assert set(doc["descriptive"]) == {"mean", "std", "min", "q1", "q3", "max"}
