"""Monthly-rebalancing portfolio decision environment.

Weights chosen at the start of a month are held fixed through that month
(no intra-month drift rebalancing); the step reward is

    alpha1 * roi - alpha2 * mdd - alpha3 * sigma

computed on the portfolio's within-month daily value path. Transaction
costs, leverage and shorting are out of scope.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import MonthlySlice
from .features import ObservationVector, build_observation, compute_monthly_metrics, correlation_matrix, max_drawdown, monthly_return_matrix
from .sentiment import SentimentTable

WEIGHT_TOL = 1e-6


@dataclass(frozen=True)
class RewardParams:
    """Linear reward weights for (roi, -mdd, -sigma)."""

    alpha1: float = 1.0
    alpha2: float = 2.0
    alpha3: float = 0.5

    def __post_init__(self):
        alphas = (self.alpha1, self.alpha2, self.alpha3)
        if any(a < 0 for a in alphas):
            raise ValueError(f"reward weights must be nonnegative, got {alphas}")
        if all(a == 0 for a in alphas):
            raise ValueError("at least one reward weight must be positive")


@dataclass(frozen=True)
class EnvState:
    month_index: int
    weights: np.ndarray
    value: float
    observation: ObservationVector


@dataclass(frozen=True)
class StepOutcome:
    state: EnvState
    reward: float
    roi: float
    mdd: float
    sigma: float
    done: bool


def project_to_simplex(raw: np.ndarray) -> np.ndarray:
    """Clamp negatives to zero and renormalize; all-zero falls back to 1/N."""
    raw = np.asarray(raw, dtype=float)
    if not np.all(np.isfinite(raw)):
        raise ValueError("action contains non-finite entries")
    clipped = np.maximum(raw, 0.0)
    total = clipped.sum()
    if total <= 0.0:
        return np.full(raw.shape, 1.0 / raw.size)
    return clipped / total


def validate_weights(w: np.ndarray, n_assets: int) -> np.ndarray:
    w = np.asarray(w, dtype=float)
    if w.shape != (n_assets,):
        raise ValueError(f"weights shape {w.shape} != ({n_assets},)")
    if not np.all(np.isfinite(w)):
        raise ValueError("weights contain non-finite entries")
    if np.any(w < -WEIGHT_TOL):
        raise ValueError(f"negative weight {w.min()}")
    if abs(w.sum() - 1.0) > WEIGHT_TOL:
        raise ValueError(f"weights sum to {w.sum()}, expected 1")
    return w


def month_value_path(slice_: MonthlySlice, weights: np.ndarray) -> np.ndarray:
    """Portfolio value path through one month, normalized to start at 1.

    Division by the first point cancels the sub-tolerance rounding in the
    weight sum so a constant market yields an exactly flat path.
    """
    rel = slice_.with_boundary() / slice_.boundary[None, :]
    path = rel @ weights
    return path / path[0]


def month_step_stats(slice_: MonthlySlice, weights: np.ndarray) -> tuple[float, float, float]:
    """(roi, mdd, sigma) of holding ``weights`` through this month."""
    path = month_value_path(slice_, weights)
    roi = float(path[-1] - 1.0)
    mdd = max_drawdown(path)
    rets = path[1:] / path[:-1] - 1.0
    sigma = float(np.std(rets, ddof=1)) if rets.size >= 2 else 0.0
    return roi, mdd, sigma


def monthly_observations(
    slices: list[MonthlySlice],
    mode: str,
    tickers: tuple[str, ...],
    sentiment: SentimentTable | None = None,
    risk_free: float = 0.0,
) -> list[ObservationVector]:
    """Precompute one observation per month for the given mode."""
    if mode == "nlp" and sentiment is None:
        raise ValueError("nlp mode requires a sentiment table")
    out = []
    for sl in slices:
        metrics = compute_monthly_metrics(sl, risk_free)
        corr = correlation_matrix(monthly_return_matrix(sl))
        scores = sentiment.scores_for_month(sl.key, tickers) if mode == "nlp" else None
        out.append(build_observation(sl, metrics, corr, scores, mode))
    return out


class PortfolioEnv:
    """Episode over a contiguous month window of precomputed slices.

    The environment instance is cheap and read-only after construction;
    independent rollouts should each own an instance.
    """

    def __init__(
        self,
        slices: list[MonthlySlice],
        observations: list[ObservationVector],
        params: RewardParams,
        window: tuple[int, int] | None = None,
    ):
        if len(slices) != len(observations):
            raise ValueError("slices and observations must align")
        if not slices:
            raise ValueError("empty environment window")
        self.slices = slices
        self.observations = observations
        self.params = params
        start, end = window if window is not None else (0, len(slices) - 1)
        if not (0 <= start <= end < len(slices)):
            raise ValueError(f"window ({start}, {end}) outside [0, {len(slices) - 1}]")
        self.window = (start, end)
        self.n_assets = slices[0].prices.shape[1]
        if self.n_assets < 2:
            raise ValueError("need at least 2 assets")

    @property
    def n_months(self) -> int:
        return self.window[1] - self.window[0] + 1

    def reset(self) -> EnvState:
        start = self.window[0]
        weights = np.full(self.n_assets, 1.0 / self.n_assets)
        return EnvState(start, weights, 1.0, self.observations[start])

    def step(self, state: EnvState, weights: np.ndarray) -> StepOutcome:
        """Hold ``weights`` through the state's month; no silent projection."""
        weights = validate_weights(weights, self.n_assets)
        t = state.month_index
        if not self.window[0] <= t <= self.window[1]:
            raise ValueError(f"month index {t} outside window {self.window}")
        roi, mdd, sigma = month_step_stats(self.slices[t], weights)
        p = self.params
        reward = p.alpha1 * roi - p.alpha2 * mdd - p.alpha3 * sigma
        done = t == self.window[1]
        next_obs = self.observations[t if done else t + 1]
        next_state = EnvState(t + 1 if not done else t, weights, state.value * (1.0 + roi), next_obs)
        return StepOutcome(next_state, float(reward), roi, mdd, sigma, done)

    def rollout(self, policy) -> tuple[list[tuple[ObservationVector, np.ndarray, float]], float]:
        """Run one episode; ``policy`` maps an observation to a raw action.

        Raw actions pass through :func:`project_to_simplex`. Returns the
        (observation, weights, reward) trajectory and the final value.
        """
        state = self.reset()
        trajectory = []
        while True:
            weights = project_to_simplex(policy(state.observation))
            outcome = self.step(state, weights)
            trajectory.append((state.observation, weights, outcome.reward))
            state = outcome.state
            if outcome.done:
                return trajectory, state.value
