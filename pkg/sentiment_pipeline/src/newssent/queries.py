"""Search query generation: one dated news URL per (term, month)."""

from __future__ import annotations

import calendar
import datetime as dt
from dataclasses import dataclass
from urllib.parse import quote_plus

import yaml

SEARCH_BASE = "https://news.google.com/search"


@dataclass(frozen=True)
class AssetQuerySet:
    asset: str
    terms: tuple[str, ...]

    def __post_init__(self):
        if not self.terms:
            raise ValueError(f"asset {self.asset}: need at least one search term")
        if len(set(self.terms)) != len(self.terms):
            raise ValueError(f"asset {self.asset}: duplicate search terms")


@dataclass(frozen=True)
class DatedQuery:
    asset: str
    term: str
    month: str  # YYYY-MM
    url: str


def parse_month(key: str) -> tuple[int, int]:
    year, month = key.split("-")
    y, m = int(year), int(month)
    if not 1 <= m <= 12:
        raise ValueError(f"bad month {key!r}")
    return y, m


def month_bounds(key: str) -> tuple[dt.date, dt.date]:
    y, m = parse_month(key)
    return dt.date(y, m, 1), dt.date(y, m, calendar.monthrange(y, m)[1])


def month_range(start: str, end: str) -> list[str]:
    y, m = parse_month(start)
    y1, m1 = parse_month(end)
    if (y, m) > (y1, m1):
        raise ValueError(f"month range {start}..{end} is reversed")
    out = []
    while (y, m) <= (y1, m1):
        out.append(f"{y:04d}-{m:02d}")
        m += 1
        if m == 13:
            y, m = y + 1, 1
    return out


def load_asset_terms(path) -> list[AssetQuerySet]:
    """Read the assets YAML: a mapping of asset id to search-term list."""
    with open(path) as fh:
        raw = yaml.safe_load(fh)
    if not isinstance(raw, dict) or not raw:
        raise ValueError(f"{path}: expected a non-empty mapping of asset -> terms")
    out = []
    for asset, terms in raw.items():
        if isinstance(terms, str):
            terms = [terms]
        out.append(AssetQuerySet(str(asset), tuple(str(t) for t in terms)))
    return out


def query_url(term: str, month: str, base: str = SEARCH_BASE) -> str:
    first, last = month_bounds(month)
    q = f"{term} after:{first.isoformat()} before:{last.isoformat()}"
    return f"{base}?q={quote_plus(q)}"


def build_queries(
    assets: list[AssetQuerySet],
    months: list[str],
    base: str = SEARCH_BASE,
) -> list[DatedQuery]:
    """Cartesian product of every asset term with every month."""
    if not assets:
        raise ValueError("no assets given")
    for a in assets:
        if not a.terms:
            raise ValueError(f"asset {a.asset}: empty term list")
    return [
        DatedQuery(a.asset, term, month, query_url(term, month, base))
        for a in assets
        for term in a.terms
        for month in months
    ]
