"""Monthly per-asset metrics, cross-asset correlation, observation assembly.

All ratio metrics guard their denominators: a zero-variance or zero-drawdown
month yields 0 rather than an infinity, which keeps observation vectors
finite for the networks downstream.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import MonthlySlice

EPS = 1e-12

MODES = ("metrics", "nlp")


@dataclass(frozen=True)
class MonthlyMetrics:
    """Per-asset risk/return statistics for one month (arrays of length N)."""

    sharpe: np.ndarray
    sortino: np.ndarray
    calmar: np.ndarray
    max_drawdown: np.ndarray
    volatility: np.ndarray

    def __post_init__(self):
        for name in ("sharpe", "sortino", "calmar", "max_drawdown", "volatility"):
            arr = getattr(self, name)
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} contains non-finite values")
        if np.any(self.max_drawdown < 0) or np.any(self.max_drawdown > 1):
            raise ValueError("max_drawdown outside [0, 1]")
        if np.any(self.volatility < 0):
            raise ValueError("volatility must be >= 0")


@dataclass(frozen=True)
class CorrelationBlock:
    """Pearson correlation of daily returns within one month."""

    matrix: np.ndarray  # [N x N]

    def __post_init__(self):
        m = self.matrix
        if m.ndim != 2 or m.shape[0] != m.shape[1]:
            raise ValueError(f"correlation matrix must be square, got {m.shape}")
        if not np.allclose(m, m.T, atol=1e-9):
            raise ValueError("correlation matrix not symmetric")
        if np.any(m < -1 - 1e-9) or np.any(m > 1 + 1e-9):
            raise ValueError("correlation entries outside [-1, 1]")

    @property
    def flat(self) -> np.ndarray:
        """Row-major flattening, diagonal included."""
        return self.matrix.reshape(-1)


@dataclass(frozen=True)
class ObservationVector:
    """Flat numeric state for one month plus a layout descriptor.

    ``layout`` maps each semantic block to its [start, stop) index range and
    covers every index exactly once, in order.
    """

    mode: str
    values: np.ndarray
    layout: tuple[tuple[str, int, int], ...]

    def __post_init__(self):
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}")
        pos = 0
        for name, start, stop in self.layout:
            if start != pos or stop <= start:
                raise ValueError(f"layout block {name} does not tile the vector")
            pos = stop
        if pos != self.values.size:
            raise ValueError(f"layout covers {pos} of {self.values.size} indices")

    def block(self, name: str) -> np.ndarray:
        for block_name, start, stop in self.layout:
            if block_name == name:
                return self.values[start:stop]
        raise KeyError(name)


def daily_returns(prices: np.ndarray) -> np.ndarray:
    """Simple returns p_t / p_{t-1} - 1 over a positive price series."""
    prices = np.asarray(prices, dtype=float)
    if prices.size < 2:
        raise ValueError("need at least 2 prices for returns")
    if np.any(prices <= 0):
        raise ValueError("prices must be strictly positive")
    return prices[1:] / prices[:-1] - 1.0


def volatility(returns: np.ndarray) -> float:
    """Sample standard deviation (ddof=1) of per-period returns."""
    returns = np.asarray(returns, dtype=float)
    if returns.size < 2:
        raise ValueError("need at least 2 returns")
    return float(np.std(returns, ddof=1))


def sharpe_ratio(returns: np.ndarray, risk_free_per_period: float = 0.0) -> float:
    returns = np.asarray(returns, dtype=float)
    if returns.size < 2:
        raise ValueError("need at least 2 returns")
    std = np.std(returns, ddof=1)
    if std < EPS:
        return 0.0
    return float((np.mean(returns) - risk_free_per_period) / std)


def sortino_ratio(returns: np.ndarray, risk_free_per_period: float = 0.0) -> float:
    returns = np.asarray(returns, dtype=float)
    if returns.size < 2:
        raise ValueError("need at least 2 returns")
    downside = np.minimum(returns - risk_free_per_period, 0.0)
    downside_dev = np.sqrt(np.mean(downside**2))
    if downside_dev < EPS:
        return 0.0
    return float((np.mean(returns) - risk_free_per_period) / downside_dev)


def max_drawdown(prices: np.ndarray) -> float:
    """Largest peak-to-trough fractional decline along the series."""
    prices = np.asarray(prices, dtype=float)
    if prices.size == 0:
        raise ValueError("empty price series")
    if np.any(prices <= 0):
        raise ValueError("prices must be strictly positive")
    peaks = np.maximum.accumulate(prices)
    return float(np.max((peaks - prices) / peaks))


def calmar_ratio(returns: np.ndarray, prices: np.ndarray) -> float:
    """Period total return over the period's max drawdown (0 when MDD ~ 0)."""
    returns = np.asarray(returns, dtype=float)
    mdd = max_drawdown(prices)
    if mdd < EPS:
        return 0.0
    total_return = float(np.prod(1.0 + returns) - 1.0)
    return total_return / mdd


def correlation_matrix(returns: np.ndarray) -> CorrelationBlock:
    """Pearson correlations across assets from a [days x N] return matrix.

    A zero-variance asset gets 0 off-diagonal and 1 on the diagonal.
    """
    returns = np.asarray(returns, dtype=float)
    if returns.ndim != 2:
        raise ValueError("expected a [days x assets] return matrix")
    if returns.shape[0] < 2:
        raise ValueError("need at least 2 return rows")
    n = returns.shape[1]
    stds = np.std(returns, axis=0, ddof=1)
    live = stds > EPS
    corr = np.eye(n)
    if live.sum() >= 2:
        sub = np.corrcoef(returns[:, live], rowvar=False)
        corr[np.ix_(live, live)] = np.clip(sub, -1.0, 1.0)
    np.fill_diagonal(corr, 1.0)
    corr = (corr + corr.T) / 2.0
    return CorrelationBlock(corr)


def compute_monthly_metrics(slice_: MonthlySlice, risk_free: float = 0.0) -> MonthlyMetrics:
    """Metrics for every asset of one month, chained through the boundary price."""
    path = slice_.with_boundary()
    n = path.shape[1]
    sharpe = np.empty(n)
    sortino = np.empty(n)
    calmar = np.empty(n)
    mdd = np.empty(n)
    vol = np.empty(n)
    for i in range(n):
        series = path[:, i]
        rets = daily_returns(series)
        sharpe[i] = sharpe_ratio(rets, risk_free)
        sortino[i] = sortino_ratio(rets, risk_free)
        calmar[i] = calmar_ratio(rets, series)
        mdd[i] = max_drawdown(series)
        vol[i] = volatility(rets)
    return MonthlyMetrics(sharpe, sortino, calmar, mdd, vol)


def monthly_return_matrix(slice_: MonthlySlice) -> np.ndarray:
    """Daily return matrix [days x N] for the month, boundary included."""
    path = slice_.with_boundary()
    return path[1:] / path[:-1] - 1.0


def build_observation(
    slice_: MonthlySlice,
    metrics: MonthlyMetrics,
    corr: CorrelationBlock,
    sentiment: np.ndarray | None,
    mode: str,
) -> ObservationVector:
    """Assemble the flat observation for one month in the requested mode.

    metrics mode: [sharpe | sortino | calmar | mdd | vol | corr row-major].
    nlp mode: [vol | sentiment].
    """
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}")
    n = slice_.prices.shape[1]
    if mode == "nlp":
        if sentiment is None:
            raise ValueError("nlp mode requires per-asset sentiment scores")
        sentiment = np.asarray(sentiment, dtype=float)
        if sentiment.shape != (n,):
            raise ValueError(f"sentiment shape {sentiment.shape} != ({n},)")
        values = np.concatenate([metrics.volatility, sentiment])
        layout = (("volatility", 0, n), ("sentiment", n, 2 * n))
        return ObservationVector("nlp", values, layout)

    blocks = [
        ("sharpe", metrics.sharpe),
        ("sortino", metrics.sortino),
        ("calmar", metrics.calmar),
        ("max_drawdown", metrics.max_drawdown),
        ("volatility", metrics.volatility),
        ("correlation", corr.flat),
    ]
    values = np.concatenate([b for _, b in blocks])
    layout = []
    pos = 0
    for name, arr in blocks:
        layout.append((name, pos, pos + arr.size))
        pos += arr.size
    return ObservationVector("metrics", values, tuple(layout))


def observation_length(mode: str, n_assets: int) -> int:
    if mode == "metrics":
        return 5 * n_assets + n_assets * n_assets
    if mode == "nlp":
        return 2 * n_assets
    raise ValueError(f"unknown mode {mode!r}")
