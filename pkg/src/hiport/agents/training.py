"""Training entry points and the seed battery."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from ..features import ObservationVector
from .common import AgentSpec, Policy
from .offpolicy import DdpgTrainer, SacTrainer, Td3Trainer
from .ppo import PpoTrainer

log = logging.getLogger(__name__)

TRAINERS = {
    "ppo": PpoTrainer,
    "sac": SacTrainer,
    "ddpg": DdpgTrainer,
    "td3": Td3Trainer,
}


class TrainingDiverged(RuntimeError):
    pass


def train_base_agent(spec: AgentSpec, env_factory, episodes: int) -> Policy:
    """Train one base policy; deterministic per (spec, env data).

    ``episodes=0`` returns the seeded initialization untouched.
    """
    if spec.algorithm not in TRAINERS:
        raise ValueError(f"unknown algorithm {spec.algorithm!r}")
    env = env_factory()
    trainer = TRAINERS[spec.algorithm](spec, env)
    curve: list[float] = []
    for ep in range(episodes):
        try:
            mean_reward = trainer.run_episode()
        except FloatingPointError as exc:
            raise TrainingDiverged(f"{spec.label}: {exc} at episode {ep}") from exc
        if not np.isfinite(mean_reward):
            raise TrainingDiverged(f"{spec.label}: non-finite episode reward at episode {ep}")
        curve.append(mean_reward)
    policy = trainer.policy()
    policy.training_curve = curve
    if curve:
        log.info("%s: %d episodes, mean reward %.5f -> %.5f", spec.label, episodes, curve[0], curve[-1])
    return policy


def policy_act(policy: Policy, observation: ObservationVector) -> np.ndarray:
    """Deterministic inference; valid simplex output or a layout error."""
    return policy.act(observation)


@dataclass
class BatteryCell:
    spec: AgentSpec
    policy: Policy | None = None
    eval_roi: float | None = None
    error: str | None = None


@dataclass
class PolicySet:
    """Results of a (algorithm x mode x seed) training battery."""

    cells: dict[tuple[str, str, int], BatteryCell] = field(default_factory=dict)

    def policies(self, algorithm: str, mode: str) -> list[Policy]:
        out = []
        for (algo, md, _seed), cell in sorted(self.cells.items()):
            if algo == algorithm and md == mode and cell.policy is not None:
                out.append(cell.policy)
        return out

    def median_cell(self, algorithm: str, mode: str) -> BatteryCell:
        """Cell whose eval ROI is the seed median (lower middle when even)."""
        cells = [
            c
            for (algo, md, _s), c in sorted(self.cells.items())
            if algo == algorithm and md == mode and c.policy is not None and c.eval_roi is not None
        ]
        if not cells:
            raise ValueError(f"no successful cells for ({algorithm}, {mode})")
        ranked = sorted(cells, key=lambda c: c.eval_roi)
        return ranked[(len(ranked) - 1) // 2]

    def failures(self) -> list[tuple[tuple[str, str, int], str]]:
        return [(key, c.error) for key, c in sorted(self.cells.items()) if c.error]


def run_seed_battery(
    algorithms: list[str],
    modes: list[str],
    seeds: list[int],
    env_factory_by_mode,
    episodes: int,
    eval_fn,
    hyperparams=None,
) -> PolicySet:
    """Train every (algorithm, mode, seed) cell; failures are recorded, not fatal.

    ``env_factory_by_mode(mode)`` returns a fresh training env factory;
    ``eval_fn(policy)`` returns the ROI used for median-seed selection.
    """
    if not seeds:
        raise ValueError("need at least one seed")
    from .common import Hyperparams

    result = PolicySet()
    for algo in algorithms:
        for mode in modes:
            for seed in seeds:
                spec = AgentSpec(algo, mode, seed, hyperparams or Hyperparams())
                cell = BatteryCell(spec)
                try:
                    cell.policy = train_base_agent(spec, env_factory_by_mode(mode), episodes)
                    cell.eval_roi = float(eval_fn(cell.policy))
                except Exception as exc:  # battery must survive per-cell failures
                    cell.error = f"{type(exc).__name__}: {exc}"
                    log.warning("battery cell %s failed: %s", spec.label, cell.error)
                result.cells[(algo, mode, seed)] = cell
    return result
