"""Brute-force reference implementations used to pin expected values.

Everything here is written with explicit loops over plain floats so it
stays independent of the vectorized code paths under test.
"""

from __future__ import annotations

import math


def ref_mean(xs) -> float:
    return sum(xs) / len(xs)


def ref_sample_std(xs) -> float:
    m = ref_mean(xs)
    return math.sqrt(sum((x - m) ** 2 for x in xs) / (len(xs) - 1))


def ref_returns(prices) -> list[float]:
    return [prices[i] / prices[i - 1] - 1.0 for i in range(1, len(prices))]


def ref_sharpe(returns, rf=0.0) -> float:
    std = ref_sample_std(returns)
    if std < 1e-12:
        return 0.0
    return (ref_mean(returns) - rf) / std


def ref_sortino(returns, rf=0.0) -> float:
    downside = [min(r - rf, 0.0) for r in returns]
    dev = math.sqrt(sum(d * d for d in downside) / len(downside))
    if dev < 1e-12:
        return 0.0
    return (ref_mean(returns) - rf) / dev


def ref_max_drawdown(prices) -> float:
    # scan every peak/trough pair
    worst = 0.0
    for i in range(len(prices)):
        for j in range(i, len(prices)):
            dd = (prices[i] - prices[j]) / prices[i]
            worst = max(worst, dd)
    return worst


def ref_calmar(returns, prices) -> float:
    mdd = ref_max_drawdown(prices)
    if mdd < 1e-12:
        return 0.0
    total = 1.0
    for r in returns:
        total *= 1.0 + r
    return (total - 1.0) / mdd


def ref_pearson(xs, ys) -> float:
    mx, my = ref_mean(xs), ref_mean(ys)
    num = sum((x - mx) * (y - my) for x, y in zip(xs, ys))
    dx = math.sqrt(sum((x - mx) ** 2 for x in xs))
    dy = math.sqrt(sum((y - my) ** 2 for y in ys))
    return num / (dx * dy)


def ref_equity_from_monthly_rois(rois) -> list[float]:
    curve = [1.0]
    for r in rois:
        curve.append(curve[-1] * (1.0 + r))
    return curve


def ref_annualized_roi(curve) -> float:
    months = len(curve) - 1
    return (curve[-1] / curve[0]) ** (12.0 / months) - 1.0


def ref_annualized_vol(curve) -> float:
    rets = [curve[i] / curve[i - 1] - 1.0 for i in range(1, len(curve))]
    return ref_sample_std(rets) * math.sqrt(12.0)


def ref_annualized_sharpe(curve, rf=0.0) -> float:
    rets = [curve[i] / curve[i - 1] - 1.0 for i in range(1, len(curve))]
    vol = ref_annualized_vol(curve)
    if vol < 1e-12:
        return 0.0
    return (ref_mean(rets) * 12.0 - rf) / vol
