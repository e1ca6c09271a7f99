"""Deterministic synthetic market generator.

Produces a desk-scale stand-in for the real 14-instrument daily panel:
weekday calendar, seeded geometric walks with per-asset drift/vol, mild
cross-asset correlation, and a sprinkling of missing cells so the fill
path gets exercised. Output follows the price CSV contract.
"""

from __future__ import annotations

import csv
import datetime as dt

import numpy as np

from .data import parse_month_key

DEFAULT_TICKERS = (
    "GSPC",
    "IXIC",
    "DJI",
    "FCHI",
    "FTSE",
    "STOXX50E",
    "HSI",
    "000001.SS",
    "BSESN",
    "NSEI",
    "KS11",
    "GC=F",
    "SI=F",
    "CL=F",
)


def weekday_calendar(start: dt.date, end: dt.date) -> list[dt.date]:
    days, d = [], start
    while d <= end:
        if d.weekday() < 5:
            days.append(d)
        d += dt.timedelta(days=1)
    return days


def synthetic_prices(
    tickers: tuple[str, ...] = DEFAULT_TICKERS,
    start_month: str = "2003-01",
    end_month: str = "2024-12",
    seed: int = 0,
    missing_fraction: float = 0.002,
) -> tuple[list[dt.date], np.ndarray]:
    """Daily price matrix with NaN holes; deterministic per seed."""
    y0, m0 = parse_month_key(start_month)
    y1, m1 = parse_month_key(end_month)
    start = dt.date(y0, m0, 1)
    end = (dt.date(y1 + 1, 1, 1) if m1 == 12 else dt.date(y1, m1 + 1, 1)) - dt.timedelta(days=1)
    cal = weekday_calendar(start, end)
    n = len(tickers)
    rng = np.random.default_rng(seed)

    drift = rng.uniform(0.00005, 0.0006, n)
    vol = rng.uniform(0.006, 0.02, n)
    market = rng.normal(0.0, 1.0, len(cal))
    beta = rng.uniform(0.2, 0.8, n)
    idio = rng.normal(0.0, 1.0, (len(cal), n))
    shocks = beta[None, :] * market[:, None] + np.sqrt(1.0 - beta[None, :] ** 2) * idio
    log_rets = drift[None, :] + vol[None, :] * shocks
    prices = rng.uniform(40.0, 4000.0, n)[None, :] * np.exp(np.cumsum(log_rets, axis=0))

    # not on the first or last row: every asset keeps its anchor observations
    holes = rng.random(prices.shape) < missing_fraction
    holes[0, :] = False
    holes[-1, :] = False
    prices[holes] = np.nan
    return cal, prices


def write_price_csv(path, tickers, calendar, prices) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["date", *tickers])
        for t, d in enumerate(calendar):
            row = [d.isoformat()]
            for i in range(len(tickers)):
                v = prices[t, i]
                row.append("" if np.isnan(v) else repr(float(v)))
            writer.writerow(row)


def generate_price_csv(
    path,
    tickers: tuple[str, ...] = DEFAULT_TICKERS,
    start_month: str = "2003-01",
    end_month: str = "2024-12",
    seed: int = 0,
) -> None:
    cal, prices = synthetic_prices(tickers, start_month, end_month, seed)
    write_price_csv(path, tickers, cal, prices)
