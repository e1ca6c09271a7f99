"""Shared agent machinery: specs, inference policies, replay buffer."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field, asdict

import numpy as np

from ..env import PortfolioEnv, project_to_simplex
from ..features import ObservationVector
from ..nets import Mlp3, forward, load_checkpoint, save_checkpoint

ALGORITHMS = ("ppo", "sac", "ddpg", "td3")
MODES = ("metrics", "nlp")


@dataclass(frozen=True)
class Hyperparams:
    """Knobs shared across the agent family; algorithm-specific ones noted."""

    actor_lr: float = 3e-3
    critic_lr: float = 1e-2
    gamma: float = 0.99
    hidden1: int = 64
    hidden2: int = 64
    batch_size: int = 64
    buffer_capacity: int = 100_000
    update_start: int = 64
    tau: float = 0.01
    # ppo
    clip_eps: float = 0.2
    ppo_epochs: int = 10
    gae_lambda: float = 0.95
    log_std_init: float = -0.5
    # sac
    entropy_weight: float = 0.05
    # ddpg / td3
    explore_noise: float = 0.1
    # td3
    policy_delay: int = 2
    target_noise: float = 0.2
    target_noise_clip: float = 0.5

    def __post_init__(self):
        if not 0.0 < self.gamma <= 1.0:
            raise ValueError(f"gamma {self.gamma} outside (0, 1]")
        if self.clip_eps <= 0:
            raise ValueError("clip_eps must be positive")
        if self.policy_delay < 1:
            raise ValueError("policy_delay must be >= 1")


@dataclass(frozen=True)
class AgentSpec:
    algorithm: str
    mode: str
    seed: int
    hyperparams: Hyperparams = field(default_factory=Hyperparams)

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"unknown algorithm {self.algorithm!r}; expected one of {ALGORITHMS}")
        if self.mode not in MODES:
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.seed < 0:
            raise ValueError("seed must be >= 0")

    @property
    def label(self) -> str:
        return f"{self.algorithm}-{self.mode}-s{self.seed}"


@dataclass
class Policy:
    """Deterministic inference-time policy: actor mean + simplex projection."""

    actor: Mlp3
    spec: AgentSpec
    training_curve: list[float] = field(default_factory=list)
    window: tuple[str, str] | None = None

    def act(self, observation) -> np.ndarray:
        if isinstance(observation, ObservationVector):
            if observation.mode != self.spec.mode:
                raise ValueError(
                    f"observation mode {observation.mode!r} does not match policy mode {self.spec.mode!r}"
                )
            values = observation.values
        else:
            values = np.asarray(observation, dtype=float)
        if values.size != self.actor.in_dim:
            raise ValueError(f"observation length {values.size} != actor input {self.actor.in_dim}")
        return project_to_simplex(forward(self.actor, values))

    def checksum(self) -> str:
        h = hashlib.sha256()
        for name, p in self.actor.params().items():
            h.update(name.encode())
            h.update(p.tobytes())
        return h.hexdigest()

    def save(self, path) -> None:
        extra = {
            "kind": "base-policy",
            "spec": {
                "algorithm": self.spec.algorithm,
                "mode": self.spec.mode,
                "seed": self.spec.seed,
                "hyperparams": asdict(self.spec.hyperparams),
            },
            "training_curve": list(self.training_curve),
            "window": list(self.window) if self.window else None,
            "checksum": self.checksum(),
        }
        save_checkpoint(self.actor, path, extra=extra)

    @classmethod
    def load(cls, path) -> "Policy":
        actor, extra = load_checkpoint(path)
        if extra.get("kind") != "base-policy":
            raise ValueError(f"{path}: not a base policy checkpoint")
        spec_dict = extra["spec"]
        spec = AgentSpec(
            algorithm=spec_dict["algorithm"],
            mode=spec_dict["mode"],
            seed=spec_dict["seed"],
            hyperparams=Hyperparams(**spec_dict["hyperparams"]),
        )
        window = tuple(extra["window"]) if extra.get("window") else None
        policy = cls(actor, spec, list(extra.get("training_curve", [])), window)
        if extra.get("checksum") and policy.checksum() != extra["checksum"]:
            raise ValueError(f"{path}: checkpoint checksum mismatch")
        return policy


class ReplayBuffer:
    """Fixed-capacity ring buffer with seeded uniform sampling."""

    def __init__(self, capacity: int, obs_dim: int, act_dim: int, rng: np.random.Generator):
        self.capacity = capacity
        self.rng = rng
        self.obs = np.zeros((capacity, obs_dim))
        self.act = np.zeros((capacity, act_dim))
        self.rew = np.zeros(capacity)
        self.nxt = np.zeros((capacity, obs_dim))
        self.done = np.zeros(capacity)
        self.size = 0
        self._head = 0

    def push(self, obs, act, rew, nxt, done):
        i = self._head
        self.obs[i] = obs
        self.act[i] = act
        self.rew[i] = rew
        self.nxt[i] = nxt
        self.done[i] = float(done)
        self._head = (i + 1) % self.capacity
        self.size = min(self.size + 1, self.capacity)

    def sample(self, batch_size: int):
        idx = self.rng.integers(0, self.size, size=batch_size)
        return self.obs[idx], self.act[idx], self.rew[idx], self.nxt[idx], self.done[idx]


def run_episode(env: PortfolioEnv, act_fn) -> tuple[list, float]:
    """Roll one episode; ``act_fn(obs_values) -> raw action``.

    Returns transitions (obs, raw_action, reward, next_obs, done) and the
    mean step reward.
    """
    state = env.reset()
    transitions = []
    total = 0.0
    while True:
        obs = state.observation.values
        raw = act_fn(obs)
        outcome = env.step(state, project_to_simplex(raw))
        transitions.append((obs, raw, outcome.reward, outcome.state.observation.values, outcome.done))
        total += outcome.reward
        state = outcome.state
        if outcome.done:
            return transitions, total / len(transitions)


def gaussian_log_prob(actions: np.ndarray, mean: np.ndarray, log_std: np.ndarray) -> np.ndarray:
    """Row-wise diagonal Gaussian log density."""
    var = np.exp(2.0 * log_std)
    quad = np.sum((actions - mean) ** 2 / var, axis=1)
    return -0.5 * (quad + actions.shape[1] * np.log(2.0 * np.pi)) - np.sum(log_std)


class VectorAdam:
    """Adam for a single flat parameter vector (log-std and friends)."""

    def __init__(self, shape, lr=3e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = np.zeros(shape)
        self.v = np.zeros(shape)
        self.t = 0

    def step(self, param: np.ndarray, grad: np.ndarray) -> np.ndarray:
        self.t += 1
        self.m = self.beta1 * self.m + (1 - self.beta1) * grad
        self.v = self.beta2 * self.v + (1 - self.beta2) * grad * grad
        m_hat = self.m / (1 - self.beta1**self.t)
        v_hat = self.v / (1 - self.beta2**self.t)
        return param - self.lr * m_hat / (np.sqrt(v_hat) + self.eps)
