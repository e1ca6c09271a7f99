"""Walk-forward backtesting and report emission.

Any actor (base policy, aggregator stack, or benchmark) is evaluated the
same way: month by month over a window, chaining value_{t+1} =
value_t * (1 + roi_t) with the environment's within-month semantics, then
annualizing from the monthly equity curve.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .data import MonthlySlice
from .env import month_step_stats, validate_weights
from .features import ObservationVector, max_drawdown

ANNUALIZATION = math.sqrt(12.0)
BENCHMARK_KINDS = ("equal_weight", "single_asset")


@dataclass(frozen=True)
class BenchmarkSpec:
    kind: str
    asset: str | None = None
    rebalance: bool = True  # equal_weight only: False = buy and hold

    def __post_init__(self):
        if self.kind not in BENCHMARK_KINDS:
            raise ValueError(f"unknown benchmark kind {self.kind!r}")
        if self.kind == "single_asset" and not self.asset:
            raise ValueError("single_asset benchmark needs an asset id")


@dataclass
class BacktestData:
    """Everything an actor may look at: slices plus per-mode observations."""

    tickers: tuple[str, ...]
    slices: list[MonthlySlice]
    observations: dict[str, list[ObservationVector]] = field(default_factory=dict)

    @property
    def month_keys(self) -> list[str]:
        return [s.key for s in self.slices]

    def window_indices(self, window: tuple[str, str]) -> tuple[int, int]:
        keys = self.month_keys
        start, end = window
        if start not in keys or end not in keys:
            raise ValueError(f"window {window} outside available months {keys[0]}..{keys[-1]}")
        i, j = keys.index(start), keys.index(end)
        if i > j:
            raise ValueError(f"window start {start} after end {end}")
        return i, j

    def obs_map(self, t: int) -> dict[str, ObservationVector]:
        return {mode: obs[t] for mode, obs in self.observations.items()}


@dataclass
class BacktestReport:
    policy_id: str
    window: tuple[str, str]
    tickers: tuple[str, ...]
    monthly_weights: np.ndarray  # [months x assets]
    equity_curve: np.ndarray  # [months + 1], starts at 1.0
    annualized_roi: float
    annualized_sharpe: float
    annualized_vol: float
    mdd: float
    fingerprint: dict = field(default_factory=dict)

    def to_json_dict(self) -> dict:
        return {
            "policy_id": self.policy_id,
            "window": list(self.window),
            "tickers": list(self.tickers),
            "monthly_weights": self.monthly_weights.tolist(),
            "equity_curve": self.equity_curve.tolist(),
            "metrics": {
                "annualized_roi": self.annualized_roi,
                "annualized_sharpe": self.annualized_sharpe,
                "annualized_vol": self.annualized_vol,
                "mdd": self.mdd,
            },
            "fingerprint": self.fingerprint,
        }

    @classmethod
    def from_json_dict(cls, payload: dict) -> "BacktestReport":
        m = payload["metrics"]
        return cls(
            policy_id=payload["policy_id"],
            window=tuple(payload["window"]),
            tickers=tuple(payload["tickers"]),
            monthly_weights=np.array(payload["monthly_weights"], dtype=float),
            equity_curve=np.array(payload["equity_curve"], dtype=float),
            annualized_roi=m["annualized_roi"],
            annualized_sharpe=m["annualized_sharpe"],
            annualized_vol=m["annualized_vol"],
            mdd=m["mdd"],
            fingerprint=payload.get("fingerprint", {}),
        )


def annualize(curve: np.ndarray, risk_free: float = 0.0) -> tuple[float, float, float, float]:
    """(roi/yr, sharpe/yr, vol/yr, mdd) from a monthly equity curve."""
    curve = np.asarray(curve, dtype=float)
    if curve.size < 2:
        raise ValueError("need at least 2 equity points")
    months = curve.size - 1
    roi = float((curve[-1] / curve[0]) ** (12.0 / months) - 1.0)
    rets = curve[1:] / curve[:-1] - 1.0
    vol = float(np.std(rets, ddof=1) * ANNUALIZATION) if rets.size >= 2 else 0.0
    sharpe = 0.0 if vol < 1e-12 else float((np.mean(rets) * 12.0 - risk_free) / vol)
    mdd = max_drawdown(curve)
    return roi, sharpe, vol, mdd


def run_backtest(
    actor,
    window: tuple[str, str],
    data: BacktestData,
    policy_id: str = "policy",
    fingerprint: dict | None = None,
) -> BacktestReport:
    """Evaluate ``actor(month_index, obs_by_mode) -> weights`` over a window."""
    i, j = data.window_indices(window)
    n = len(data.tickers)
    weights_log = []
    curve = [1.0]
    for t in range(i, j + 1):
        w = validate_weights(actor(t, data.obs_map(t)), n)
        roi, _, _ = month_step_stats(data.slices[t], w)
        weights_log.append(w)
        curve.append(curve[-1] * (1.0 + roi))
    equity = np.array(curve)
    roi, sharpe, vol, mdd = annualize(equity)
    return BacktestReport(
        policy_id=policy_id,
        window=window,
        tickers=data.tickers,
        monthly_weights=np.vstack(weights_log),
        equity_curve=equity,
        annualized_roi=roi,
        annualized_sharpe=sharpe,
        annualized_vol=vol,
        mdd=mdd,
        fingerprint=fingerprint or {},
    )


def benchmark_actor(spec: BenchmarkSpec, data: BacktestData, window: tuple[str, str] | None = None):
    """Actor for the passive benchmarks.

    The buy-and-hold equal-weight variant drifts with cumulative growth and
    must be anchored: pass the backtest window so shares are fixed at its
    first month.
    """
    n = len(data.tickers)
    if spec.kind == "single_asset":
        if spec.asset not in data.tickers:
            raise ValueError(f"unknown benchmark asset {spec.asset!r}")
        unit = np.zeros(n)
        unit[data.tickers.index(spec.asset)] = 1.0
        return lambda t, obs: unit
    if spec.rebalance:
        uniform = np.full(n, 1.0 / n)
        return lambda t, obs: uniform

    if window is None:
        raise ValueError("buy-and-hold benchmark needs the backtest window for anchoring")
    start, _ = data.window_indices(window)
    growth = np.array([s.prices[-1] / s.boundary for s in data.slices])  # [M x N]

    def actor(t, obs):
        if t < start:
            raise ValueError(f"month {t} precedes the buy-and-hold anchor {start}")
        g = np.prod(growth[start:t], axis=0) if t > start else np.ones(n)
        return g / g.sum()

    return actor


def policy_actor(policy):
    """Adapt a base :class:`~hiport.agents.Policy` to the actor signature."""
    mode = policy.spec.mode
    return lambda t, obs_by_mode: policy.act(obs_by_mode[mode])


def hierarchy_actor(hierarchy):
    """Adapt a trained :class:`~hiport.hierarchy.Hierarchy` stack."""
    return lambda t, obs_by_mode: hierarchy.act(t, obs_by_mode)


def reports_to_json(reports: list[BacktestReport]) -> str:
    return json.dumps([r.to_json_dict() for r in reports], sort_keys=True, indent=2)


def summary_rows(reports: list[BacktestReport]) -> list[list]:
    rows = [["policy_id", "annualized_roi", "annualized_sharpe", "annualized_vol", "mdd"]]
    for r in reports:
        rows.append(
            [r.policy_id, repr(r.annualized_roi), repr(r.annualized_sharpe), repr(r.annualized_vol), repr(r.mdd)]
        )
    return rows


def equity_svg(
    reports: list[BacktestReport],
    log_scale: bool = False,
    width: int = 860,
    height: int = 420,
) -> str:
    """Self-contained multi-line equity chart; deterministic output."""
    margin = 50.0
    plot_w, plot_h = width - 2 * margin, height - 2 * margin
    palette = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd", "#ff7f0e", "#8c564b", "#17becf", "#7f7f7f"]

    def transform(v: float) -> float:
        return math.log10(v) if log_scale else v

    all_vals = [transform(float(v)) for r in reports for v in r.equity_curve]
    lo, hi = min(all_vals), max(all_vals)
    if hi - lo < 1e-12:
        lo, hi = lo - 0.5, hi + 0.5
    max_len = max(r.equity_curve.size for r in reports)

    def x_at(idx: int) -> float:
        return margin + plot_w * idx / max(max_len - 1, 1)

    def y_at(v: float) -> float:
        return margin + plot_h * (1.0 - (transform(v) - lo) / (hi - lo))

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">',
        f'<rect width="{width}" height="{height}" fill="white"/>',
        f'<line x1="{margin}" y1="{margin}" x2="{margin}" y2="{height - margin}" stroke="#333"/>',
        f'<line x1="{margin}" y1="{height - margin}" x2="{width - margin}" y2="{height - margin}" stroke="#333"/>',
        f'<text x="{margin}" y="{margin - 20}" font-size="13" fill="#333">'
        f'equity ({"log scale" if log_scale else "linear"})</text>',
    ]
    for k, r in enumerate(reports):
        color = palette[k % len(palette)]
        pts = " ".join(
            f"{x_at(i):.3f},{y_at(float(v)):.3f}" for i, v in enumerate(r.equity_curve)
        )
        parts.append(f'<polyline fill="none" stroke="{color}" stroke-width="1.5" points="{pts}"/>')
        parts.append(
            f'<text x="{width - margin + 4:.0f}" y="{margin + 16 * k + 10:.0f}" font-size="11" '
            f'fill="{color}">{r.policy_id}</text>'
        )
    parts.append("</svg>")
    return "\n".join(parts)


def emit_report(reports: list[BacktestReport], out_dir, log_scale: bool = False) -> dict[str, str]:
    """Write JSON, CSV summary and SVG chart; returns the file map."""
    if not reports:
        raise ValueError("no reports to emit")
    from pathlib import Path

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    files = {}
    json_path = out / "reports.json"
    json_path.write_text(reports_to_json(reports))
    files["json"] = str(json_path)

    csv_path = out / "summary.csv"
    with open(csv_path, "w", newline="") as fh:
        csv.writer(fh).writerows(summary_rows(reports))
    files["csv"] = str(csv_path)

    svg_path = out / ("equity_log.svg" if log_scale else "equity.svg")
    svg_path.write_text(equity_svg(reports, log_scale=log_scale))
    files["svg"] = str(svg_path)
    return files
