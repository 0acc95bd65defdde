"""Attention-LSTM toolkit for monthly climate series: ingestion, statistics, features, models and experiments."""

__version__ = "0.1.0"

from .errors import ClimcastError  # noqa: E402
from .ingest import MonthlySeries, parse_csv  # noqa: E402

__all__ = ["ClimcastError", "MonthlySeries", "parse_csv", "__version__"]
