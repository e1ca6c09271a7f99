"""Monthly per-asset sentiment scores: aggregation, file contract, simulation.

File contract (shared with the scraping pipeline): CSV with header
``month,ticker,score,n_articles`` where month is ``YYYY-MM`` and score is
the mean of (positive - negative) class probabilities over that month's
articles, so it always lies in [-1, 1]. Cells absent from the file read
back as a neutral 0 with a no-news flag.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .data import PriceTable, monthly_partition


class SentimentFormatError(ValueError):
    """Sentiment CSV violates the file contract."""


@dataclass(frozen=True)
class ArticleSentiment:
    """Class probabilities for one article about one asset in one month."""

    p_positive: float
    p_negative: float
    p_neutral: float
    asset: str
    month: str

    def __post_init__(self):
        for name in ("p_positive", "p_negative", "p_neutral"):
            p = getattr(self, name)
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"{name}={p} outside [0, 1]")
        total = self.p_positive + self.p_negative + self.p_neutral
        if abs(total - 1.0) > 1e-6:
            raise ValueError(f"probabilities sum to {total}, expected 1")


@dataclass(frozen=True)
class SentimentCell:
    score: float
    n_articles: int

    @property
    def no_news(self) -> bool:
        return self.n_articles == 0


_NEUTRAL = SentimentCell(0.0, 0)


@dataclass
class SentimentTable:
    """Immutable-after-load (month, ticker) -> score table."""

    cells: dict[tuple[str, str], SentimentCell] = field(default_factory=dict)

    def get(self, month: str, ticker: str) -> SentimentCell:
        return self.cells.get((month, ticker), _NEUTRAL)

    def scores_for_month(self, month: str, tickers) -> np.ndarray:
        return np.array([self.get(month, t).score for t in tickers])


def aggregate_articles(articles: list[ArticleSentiment]) -> SentimentCell:
    """Mean of (p_positive - p_negative); an empty month is neutral 0."""
    if not articles:
        return SentimentCell(0.0, 0)
    score = sum(a.p_positive - a.p_negative for a in articles) / len(articles)
    return SentimentCell(float(score), len(articles))


def load_sentiment_table(path) -> SentimentTable:
    """Load the sentiment CSV contract; duplicate keys and bad scores raise."""
    table = SentimentTable()
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            raise SentimentFormatError(f"{path}: empty file")
        if [c.strip() for c in header] != ["month", "ticker", "score", "n_articles"]:
            raise SentimentFormatError(
                f"{path}: expected header month,ticker,score,n_articles, got {header}"
            )
        for r, row in enumerate(reader):
            if not row or not any(c.strip() for c in row):
                continue
            if len(row) != 4:
                raise SentimentFormatError(f"{path} row {r}: expected 4 fields, got {len(row)}")
            month, ticker = row[0].strip(), row[1].strip()
            try:
                score = float(row[2])
                n = int(row[3])
            except ValueError as exc:
                raise SentimentFormatError(f"{path} row {r}: {exc}") from None
            if not -1.0 <= score <= 1.0:
                raise SentimentFormatError(f"{path} row {r}: score {score} outside [-1, 1]")
            if n < 0:
                raise SentimentFormatError(f"{path} row {r}: negative article count")
            key = (month, ticker)
            if key in table.cells:
                raise SentimentFormatError(f"{path} row {r}: duplicate cell {key}")
            table.cells[key] = SentimentCell(score, n)
    return table


def save_sentiment_table(table: SentimentTable, path) -> None:
    """Write the CSV contract with a stable (month, ticker) row order."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["month", "ticker", "score", "n_articles"])
        for (month, ticker), cell in sorted(table.cells.items()):
            writer.writerow([month, ticker, repr(cell.score), cell.n_articles])


def simulate_sentiment(
    table: PriceTable,
    months: list[str] | None = None,
    seed: int = 0,
    signal_strength: float = 0.0,
) -> SentimentTable:
    """Synthesize a sentiment table from prices.

    score = clamp(lam * tanh(z) + (1 - lam) * u, -1, 1) where z is the
    asset's next-month return standardized across all (month, asset) cells
    and u ~ Uniform(-1, 1) from the seeded generator.

    signal_strength > 0 leaks next-month information by construction; it
    exists for oracle-style tests only. Production runs must use 0 or load
    real score files.
    """
    lam = float(signal_strength)
    if not 0.0 <= lam <= 1.0:
        raise ValueError(f"signal_strength {lam} outside [0, 1]")
    slices = monthly_partition(table)
    keys = [s.key for s in slices]
    if months is None:
        months = keys
    unknown = sorted(set(months) - set(keys))
    if unknown:
        raise ValueError(f"months not in price table: {unknown}")

    # next-month total return per (month, asset); last month has no successor
    month_rets = np.array([s.prices[-1] / s.boundary - 1.0 for s in slices])  # [M x N]
    nxt = np.full_like(month_rets, np.nan)
    nxt[:-1] = month_rets[1:]
    finite = nxt[np.isfinite(nxt)]
    mu, sd = float(np.mean(finite)), float(np.std(finite))
    z = np.zeros_like(nxt)
    if sd > 1e-12:
        z[np.isfinite(nxt)] = (finite - mu) / sd

    rng = np.random.default_rng(seed)
    out = SentimentTable()
    index = {k: i for i, k in enumerate(keys)}
    n_assets = table.n_assets
    for m in months:
        row = index[m]
        u = rng.uniform(-1.0, 1.0, size=n_assets)
        proxy = np.tanh(z[row])
        score = np.clip(lam * proxy + (1.0 - lam) * u, -1.0, 1.0)
        for i, ticker in enumerate(table.tickers):
            out.cells[(m, ticker)] = SentimentCell(float(score[i]), 1)
    return out
