"""Price data loading, cleaning and monthly partitioning.

The engine consumes one daily adjusted-close CSV with header
``date,<ticker1>,...,<tickerN>``. Dates are ISO ``YYYY-MM-DD``; an empty
cell marks a missing quote. Asset order is fixed by the caller's declared
ticker list at load time and is preserved by every downstream vector.
"""

from __future__ import annotations

import calendar as _calendar
import csv
import datetime as dt
from dataclasses import dataclass

import numpy as np

FILL_KINDS = ("forward", "backward", "interpolate")


class SchemaError(ValueError):
    """CSV header does not match the declared ticker universe."""


class PriceParseError(ValueError):
    """A cell failed to parse; message carries the data row index."""


class EmptyFileError(ValueError):
    """File holds no data rows at all."""


@dataclass(frozen=True)
class PriceTable:
    """Daily adjusted-close panel on a shared calendar.

    ``prices[t, i]`` is the close of ``tickers[i]`` on ``calendar[t]``;
    NaN marks a missing quote until :func:`fill_missing` runs.
    """

    tickers: tuple[str, ...]
    calendar: tuple[dt.date, ...]
    prices: np.ndarray

    def __post_init__(self):
        if self.prices.shape != (len(self.calendar), len(self.tickers)):
            raise ValueError(
                f"price matrix shape {self.prices.shape} does not match "
                f"{len(self.calendar)} dates x {len(self.tickers)} tickers"
            )
        for a, b in zip(self.calendar, self.calendar[1:]):
            if a >= b:
                raise ValueError(f"calendar not strictly increasing at {a} -> {b}")

    @property
    def n_assets(self) -> int:
        return len(self.tickers)

    def is_dense(self) -> bool:
        return bool(np.all(np.isfinite(self.prices)))


@dataclass(frozen=True)
class FillPolicy:
    """Gap-filling rule for interior gaps.

    Leading gaps are always backward-filled and trailing gaps forward-filled
    so any asset with at least one observation comes out dense.
    """

    kind: str = "forward"

    def __post_init__(self):
        if self.kind not in FILL_KINDS:
            raise ValueError(f"unknown fill kind {self.kind!r}; expected one of {FILL_KINDS}")


@dataclass(frozen=True)
class MonthlySlice:
    """One month of daily prices plus the prior month's closing price.

    ``boundary[i]`` is the last close of the previous month (the slice's own
    first close for the first month) and anchors return chaining: the first
    daily return of the month is ``prices[0] / boundary - 1``.
    """

    month: tuple[int, int]
    dates: tuple[dt.date, ...]
    prices: np.ndarray  # [days x assets]
    boundary: np.ndarray  # [assets]

    @property
    def key(self) -> str:
        return f"{self.month[0]:04d}-{self.month[1]:02d}"

    def with_boundary(self) -> np.ndarray:
        """Price path including the boundary row, shape [days+1 x assets]."""
        return np.vstack([self.boundary[None, :], self.prices])


def load_price_table(path, expected_tickers: list[str]) -> PriceTable:
    """Parse a price CSV into a :class:`PriceTable` in declared ticker order.

    Missing cells stay NaN (never dropped); rows are sorted by date.
    Raises :class:`SchemaError` on a header mismatch (naming the offending
    column), :class:`PriceParseError` with the row index on a bad cell, and
    :class:`EmptyFileError` when no data rows exist.
    """
    expected = list(expected_tickers)
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    rows = [r for r in rows if r and any(cell.strip() for cell in r)]
    if not rows:
        raise EmptyFileError(f"{path}: no header or data rows")
    header, data_rows = rows[0], rows[1:]
    if not header or header[0].strip().lower() != "date":
        raise SchemaError(f"{path}: first header column must be 'date', got {header[:1]}")
    file_tickers = [c.strip() for c in header[1:]]
    missing = [t for t in expected if t not in file_tickers]
    extra = [t for t in file_tickers if t not in expected]
    if missing:
        raise SchemaError(f"{path}: missing ticker column(s): {', '.join(missing)}")
    if extra:
        raise SchemaError(f"{path}: unexpected ticker column(s): {', '.join(extra)}")
    if len(file_tickers) != len(set(file_tickers)):
        raise SchemaError(f"{path}: duplicate ticker columns in header")
    if not data_rows:
        raise EmptyFileError(f"{path}: header only, no data rows")

    col_of = {t: file_tickers.index(t) + 1 for t in expected}
    dates: list[dt.date] = []
    values = np.full((len(data_rows), len(expected)), np.nan)
    for r, row in enumerate(data_rows):
        try:
            dates.append(dt.date.fromisoformat(row[0].strip()))
        except ValueError as exc:
            raise PriceParseError(f"{path} row {r}: bad date {row[0]!r}: {exc}") from None
        for i, ticker in enumerate(expected):
            cell = row[col_of[ticker]].strip() if col_of[ticker] < len(row) else ""
            if not cell:
                continue
            try:
                values[r, i] = float(cell)
            except ValueError:
                raise PriceParseError(
                    f"{path} row {r}: bad number {cell!r} for {ticker}"
                ) from None

    order = np.argsort(np.array([d.toordinal() for d in dates], dtype=np.int64), kind="stable")
    sorted_dates = [dates[k] for k in order]
    for a, b in zip(sorted_dates, sorted_dates[1:]):
        if a == b:
            raise PriceParseError(f"{path}: duplicate date {a}")
    return PriceTable(tuple(expected), tuple(sorted_dates), values[order])


def _fill_series(col: np.ndarray, kind: str) -> np.ndarray:
    out = col.copy()
    obs = np.flatnonzero(np.isfinite(out))
    first, last = obs[0], obs[-1]
    out[:first] = out[first]  # leading: backward fill
    out[last + 1 :] = out[last]  # trailing: forward fill
    for lo, hi in zip(obs, obs[1:]):
        if hi == lo + 1:
            continue
        gap = np.arange(lo + 1, hi)
        if kind == "forward":
            out[gap] = out[lo]
        elif kind == "backward":
            out[gap] = out[hi]
        else:
            out[gap] = np.interp(gap, [lo, hi], [out[lo], out[hi]])
    return out


def fill_missing(table: PriceTable, policy: FillPolicy) -> PriceTable:
    """Densify the table: interior gaps per ``policy``, edges per the fixed rule.

    Observed values are never altered. Raises when an asset has no
    observations at all.
    """
    filled = np.empty_like(table.prices)
    for i, ticker in enumerate(table.tickers):
        col = table.prices[:, i]
        if not np.any(np.isfinite(col)):
            raise ValueError(f"asset {ticker} has no observed prices; cannot fill")
        filled[:, i] = _fill_series(col, policy.kind)
    if np.any(filled <= 0):
        bad = np.argwhere(filled <= 0)[0]
        raise ValueError(
            f"nonpositive price for {table.tickers[bad[1]]} on {table.calendar[bad[0]]}"
        )
    return PriceTable(table.tickers, table.calendar, filled)


def minmax_normalize(series: np.ndarray) -> np.ndarray:
    """Affine rescale to [0, 1]; a constant series maps to all 0.5."""
    series = np.asarray(series, dtype=float)
    if series.size == 0:
        raise ValueError("cannot normalize an empty series")
    lo, hi = series.min(), series.max()
    if hi - lo == 0:
        return np.full_like(series, 0.5)
    return (series - lo) / (hi - lo)


def month_key(year: int, month: int) -> str:
    return f"{year:04d}-{month:02d}"


def parse_month_key(key: str) -> tuple[int, int]:
    year, month = key.split("-")
    y, m = int(year), int(month)
    if not 1 <= m <= 12:
        raise ValueError(f"bad month key {key!r}")
    return y, m


def month_end(year: int, month: int) -> dt.date:
    return dt.date(year, month, _calendar.monthrange(year, month)[1])


def monthly_partition(table: PriceTable) -> list[MonthlySlice]:
    """Split a dense table into chronological per-month slices.

    Each slice carries the prior month's last close as its boundary price;
    the first slice uses its own first close. Requires at least two
    calendar months of data.
    """
    if not table.is_dense():
        raise ValueError("monthly_partition requires a dense table; run fill_missing first")
    groups: dict[tuple[int, int], list[int]] = {}
    for t, d in enumerate(table.calendar):
        groups.setdefault((d.year, d.month), []).append(t)
    months = sorted(groups)
    if len(months) < 2:
        raise ValueError(f"need >= 2 calendar months, got {len(months)}")
    slices = []
    prev_close: np.ndarray | None = None
    for ym in months:
        idx = groups[ym]
        prices = table.prices[idx, :]
        boundary = prices[0].copy() if prev_close is None else prev_close
        slices.append(
            MonthlySlice(
                month=ym,
                dates=tuple(table.calendar[t] for t in idx),
                prices=prices.copy(),
                boundary=boundary,
            )
        )
        prev_close = prices[-1].copy()
    return slices
