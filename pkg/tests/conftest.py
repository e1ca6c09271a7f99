import datetime as dt

import numpy as np

from hiport.data import PriceTable, monthly_partition


def weekday_calendar(start: dt.date, end: dt.date) -> list[dt.date]:
    days, d = [], start
    while d <= end:
        if d.weekday() < 5:
            days.append(d)
        d += dt.timedelta(days=1)
    return days


def geometric_market(
    n_assets: int,
    start: dt.date,
    end: dt.date,
    seed: int = 0,
    drift: float = 0.0002,
    vol: float = 0.01,
    tickers: tuple[str, ...] | None = None,
) -> PriceTable:
    """Random geometric-walk daily prices on a weekday calendar."""
    cal = weekday_calendar(start, end)
    rng = np.random.default_rng(seed)
    log_rets = rng.normal(drift, vol, (len(cal), n_assets))
    prices = 100.0 * np.exp(np.cumsum(log_rets, axis=0))
    names = tickers or tuple(f"A{i}" for i in range(n_assets))
    return PriceTable(names, tuple(cal), prices)


def rate_market(
    monthly_rates: dict[str, float],
    start: dt.date,
    n_months: int,
) -> PriceTable:
    """Deterministic market where each asset compounds at a fixed monthly rate.

    Within a month the growth is spread evenly in log space, so month-end
    prices chain exactly at (1 + rate) per month.
    """
    end = start + dt.timedelta(days=31 * n_months - 15)
    cal = weekday_calendar(start, end)
    months: list[list[int]] = []
    seen: dict[tuple[int, int], int] = {}
    for t, d in enumerate(cal):
        ym = (d.year, d.month)
        if ym not in seen:
            seen[ym] = len(months)
            months.append([])
        months[seen[ym]].append(t)
    cols = []
    for rate in monthly_rates.values():
        price = np.empty(len(cal))
        level = 100.0
        for idx in months:
            d_m = len(idx)
            for k, t in enumerate(idx):
                price[t] = level * (1.0 + rate) ** ((k + 1) / d_m)
            level = level * (1.0 + rate)
        cols.append(price)
    return PriceTable(tuple(monthly_rates), tuple(cal), np.column_stack(cols))


def slices_of(table: PriceTable):
    return monthly_partition(table)
