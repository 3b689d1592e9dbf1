"""CSV ingestion of prices and CDS spreads, yearly partitioning and result tables.

Inputs are ``symbol,date,price`` and ``symbol,date,spread_bps`` files with
ISO-8601 dates.  Output tables use 17 significant digits so every float
round-trips exactly.
"""

from __future__ import annotations

import csv
import datetime as dt
import io
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import DataError

PRICE_HEADER = ("symbol", "date", "price")
CDS_HEADER = ("symbol", "date", "spread_bps")
CALIBRATION_COLUMNS = ("symbol", "year", "theta", "sigma", "kappa", "g", "nll_gbm", "nll_qed",
                       "kramers_rate", "model_spread_bps", "observed_mean_spread_bps", "converged")
RATES_COLUMNS = ("symbol", "year", "method", "rate", "spread_bps")


@dataclass(frozen=True)
class MarketSeries:
    """Log of window-mean rescaled prices: ``y = ln(price / mean(price))``."""

    symbol: str
    dates: tuple
    y: np.ndarray
    rescale_factor: float
    too_short: bool = False

    def __len__(self) -> int:
        return len(self.dates)

    @property
    def prices(self) -> np.ndarray:
        return self.rescale_factor * np.exp(self.y)


@dataclass(frozen=True)
class CdsSeries:
    symbol: str
    dates: tuple
    spread_bps: np.ndarray
    annual_means: dict = field(default_factory=dict)


def _read_rows(path, header: tuple[str, ...], symbol: str | None):
    """Yield ``(line_no, symbol, date, value)`` with validation."""
    text = Path(path).read_text()
    if not text.strip():
        return []
    reader = csv.reader(io.StringIO(text))
    first = next(reader)
    if tuple(c.strip() for c in first) != header:
        raise DataError(f"{path}: line 1: expected header {','.join(header)}")
    rows = []
    for row in reader:
        line = reader.line_num
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != 3:
            raise DataError(f"{path}: line {line}: expected 3 fields, got {len(row)}")
        sym, day, raw = (c.strip() for c in row)
        try:
            date = dt.date.fromisoformat(day)
        except ValueError:
            raise DataError(f"{path}: line {line}: bad date {day!r}") from None
        if raw == "":
            continue  # missing value: skipped, no imputation
        try:
            value = float(raw)
        except ValueError:
            raise DataError(f"{path}: line {line}: bad number {raw!r}") from None
        if not math.isfinite(value):
            raise DataError(f"{path}: line {line}: non-finite value")
        if symbol is None or sym == symbol:
            rows.append((line, sym, date, value))
    return rows


def _sorted_unique(rows, path):
    rows = sorted(rows, key=lambda r: (r[2], r[0]))
    for a, b in zip(rows, rows[1:]):
        if a[2] == b[2]:
            raise DataError(f"{path}: duplicate date {a[2].isoformat()} (lines {a[0]} and {b[0]})")
    return rows


def rescale(symbol: str, dates, prices) -> MarketSeries:
    """Rescale by the mean price and take logs."""
    prices = np.asarray(prices, dtype=float)
    if prices.size == 0:
        return MarketSeries(symbol, tuple(dates), np.empty(0), math.nan, True)
    if np.any(prices <= 0):
        raise DataError(f"{symbol}: non-positive price")
    mean = float(prices.mean())
    return MarketSeries(symbol, tuple(dates), np.log(prices / mean), mean, prices.size < 2)


def load_prices(path, symbol: str | None = None) -> MarketSeries:
    """Read a price CSV, keep ``symbol`` (all rows if None), sort by date and rescale.

    Raises
    ------
    DataError
        On malformed rows (with line numbers), non-positive prices or
        duplicate dates.
    """
    rows = _read_rows(path, PRICE_HEADER, symbol)
    for line, sym, date, value in rows:
        if value <= 0:
            raise DataError(f"{path}: line {line}: non-positive price {value!r}")
    rows = _sorted_unique(rows, path)
    sym = symbol if symbol is not None else (rows[0][1] if rows else "")
    return rescale(sym, [r[2] for r in rows], [r[3] for r in rows])


def _annual_means(dates, values) -> dict:
    acc: dict[int, list[float]] = {}
    for d, v in zip(dates, values):
        acc.setdefault(d.year, []).append(v)
    return {year: math.fsum(vs) / len(vs) for year, vs in sorted(acc.items())}


def load_cds(path, symbol: str | None = None) -> CdsSeries:
    """Read a CDS CSV and compute per-year arithmetic mean spreads.

    An empty file yields an empty series.
    """
    rows = _read_rows(path, CDS_HEADER, symbol)
    for line, sym, date, value in rows:
        if value < 0:
            raise DataError(f"{path}: line {line}: negative spread {value!r}")
    rows = _sorted_unique(rows, path)
    sym = symbol if symbol is not None else (rows[0][1] if rows else "")
    dates = tuple(r[2] for r in rows)
    values = np.array([r[3] for r in rows], dtype=float)
    return CdsSeries(sym, dates, values, _annual_means(dates, values))


def partition_by_year(series: MarketSeries) -> dict[int, MarketSeries]:
    """Split into calendar years, each rescaled by its own mean price.

    Years with fewer than two observations carry ``too_short=True``.
    """
    prices = series.prices
    groups: dict[int, list[int]] = {}
    for i, d in enumerate(series.dates):
        groups.setdefault(d.year, []).append(i)
    out = {}
    for year, idx in sorted(groups.items()):
        out[year] = rescale(series.symbol, [series.dates[i] for i in idx], prices[idx])
    return out


def _fmt(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return str(v)


def write_table(path, columns: tuple[str, ...], rows) -> None:
    """Write dict rows with a fixed column order; floats use ``.17g``.

    ``path`` may also be an open text stream.
    """
    if hasattr(path, "write"):
        _write_rows(path, columns, rows)
        return
    with open(path, "w", newline="") as fh:
        _write_rows(fh, columns, rows)


def _write_rows(fh, columns, rows) -> None:
    w = csv.writer(fh, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([_fmt(row.get(c)) for c in columns])


def read_table(path) -> list[dict]:
    """Inverse of :func:`write_table`; numeric-looking fields become floats."""
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    out = []
    for row in rows:
        conv = {}
        for k, v in row.items():
            if v in ("true", "false"):
                conv[k] = v == "true"
            elif v == "":
                conv[k] = None
            else:
                try:
                    conv[k] = (v if k in ("symbol", "method") else int(v) if k == "year" else float(v))
                except ValueError:
                    conv[k] = v
        out.append(conv)
    return out


def write_calibration_csv(path, rows) -> None:
    write_table(path, CALIBRATION_COLUMNS, rows)


def write_rates_csv(path, rows) -> None:
    write_table(path, RATES_COLUMNS, rows)
