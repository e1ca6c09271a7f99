"""Decision aggregation tiers trained by lookahead imitation.

A meta aggregator consumes the concatenated allocations of all base
policies of one modality (every algorithm and seed); the top aggregator
consumes the two meta allocations. Both tiers train the same way: label
each month with the contributor whose allocation, held fixed for the next
H months, accumulates the highest environment reward, then fit the softmax
network to those winning allocations with shuffled minibatch MSE.

Aggregator inputs are canonicalized by contributor id before they reach
the network, so any consistent reordering of the configured contributor
list trains the identical model and yields identical allocations.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass

import numpy as np

from .agents.common import Policy
from .env import PortfolioEnv, month_step_stats, validate_weights
from .nets import (
    Mlp3,
    OptimState,
    TrainBatch,
    backward,
    forward,
    init_mlp3,
    load_checkpoint,
    mse_loss,
    optim_step,
    save_checkpoint,
)

LEVELS = ("meta-metrics", "meta-nlp", "super")


@dataclass(frozen=True)
class DecisionPanel:
    """Per-month allocations of every contributor, in configured order."""

    month_index: int
    contributor_ids: tuple[str, ...]
    weights: np.ndarray  # [contributors x assets]

    def __post_init__(self):
        if len(self.contributor_ids) != self.weights.shape[0]:
            raise ValueError("contributor ids and weight rows differ")
        if len(set(self.contributor_ids)) != len(self.contributor_ids):
            raise ValueError("contributor ids must be unique")
        for i, w in enumerate(self.weights):
            validate_weights(w, self.weights.shape[1])

    @property
    def concatenated(self) -> np.ndarray:
        return self.weights.reshape(-1)


@dataclass(frozen=True)
class LookaheadSample:
    month_index: int
    inputs: np.ndarray  # concatenated panel, panel order
    target: np.ndarray  # winning contributor's allocation
    chosen_id: str
    lookahead_reward: float


@dataclass(frozen=True)
class AggregatorConfig:
    epochs: int = 200
    batch_size: int = 32
    lookahead: int = 3
    lr: float = 1e-3
    hidden1: int = 64
    hidden2: int = 64
    seed: int = 0

    def __post_init__(self):
        if self.lookahead < 1:
            raise ValueError("lookahead must be >= 1")
        if self.epochs < 0 or self.batch_size < 1:
            raise ValueError("bad training config")


@dataclass
class AggregatorModel:
    """Softmax network over a canonicalized contributor panel."""

    net: Mlp3
    level: str
    contributor_ids: tuple[str, ...]  # canonical (sorted) order
    contributor_checksums: tuple[str, ...]
    config: AggregatorConfig
    final_loss: float = float("nan")

    def __post_init__(self):
        if self.level not in LEVELS:
            raise ValueError(f"unknown level {self.level!r}; expected one of {LEVELS}")
        if list(self.contributor_ids) != sorted(self.contributor_ids):
            raise ValueError("contributor ids must be stored in canonical order")

    @property
    def n_assets(self) -> int:
        return self.net.out_dim

    def checksum(self) -> str:
        h = hashlib.sha256()
        for name, p in self.net.params().items():
            h.update(name.encode())
            h.update(p.tobytes())
        return h.hexdigest()

    def save(self, path) -> None:
        extra = {
            "kind": "aggregator",
            "level": self.level,
            "contributors": {
                "ids": list(self.contributor_ids),
                "checksums": list(self.contributor_checksums),
            },
            "config": {
                "epochs": self.config.epochs,
                "batch_size": self.config.batch_size,
                "lookahead": self.config.lookahead,
                "lr": self.config.lr,
                "hidden1": self.config.hidden1,
                "hidden2": self.config.hidden2,
                "seed": self.config.seed,
            },
            "final_loss": self.final_loss,
            "checksum": self.checksum(),
        }
        save_checkpoint(self.net, path, extra=extra)

    @classmethod
    def load(cls, path) -> "AggregatorModel":
        net, extra = load_checkpoint(path)
        if extra.get("kind") != "aggregator":
            raise ValueError(f"{path}: not an aggregator checkpoint")
        model = cls(
            net=net,
            level=extra["level"],
            contributor_ids=tuple(extra["contributors"]["ids"]),
            contributor_checksums=tuple(extra["contributors"]["checksums"]),
            config=AggregatorConfig(**extra["config"]),
            final_loss=extra.get("final_loss", float("nan")),
        )
        if extra.get("checksum") and model.checksum() != extra["checksum"]:
            raise ValueError(f"{path}: checkpoint checksum mismatch")
        return model


class PolicyContributor:
    """Base policy exposed under the panel contract."""

    def __init__(self, policy: Policy, contributor_id: str | None = None):
        self.policy = policy
        self.id = contributor_id or policy.spec.label

    def decide(self, month_index: int, obs_by_mode: dict) -> np.ndarray:
        return self.policy.act(obs_by_mode[self.policy.spec.mode])

    def checksum(self) -> str:
        return self.policy.checksum()


class AggregatorContributor:
    """Aggregator acting over its own sub-panel, exposed as a contributor."""

    def __init__(self, model: AggregatorModel, sub_contributors: list, contributor_id: str | None = None):
        self.model = model
        self.subs = list(sub_contributors)
        self.id = contributor_id or model.level

    def decide(self, month_index: int, obs_by_mode: dict) -> np.ndarray:
        panel = build_panel(self.subs, month_index, obs_by_mode)
        return aggregator_act(self.model, panel)

    def checksum(self) -> str:
        return self.model.checksum()


def build_panel(contributors: list, month_index: int, obs_by_mode: dict) -> DecisionPanel:
    """Collect every contributor's allocation for one month."""
    if not contributors:
        raise ValueError("empty contributor list")
    rows, ids = [], []
    for c in contributors:
        try:
            rows.append(np.asarray(c.decide(month_index, obs_by_mode), dtype=float))
        except Exception as exc:
            raise RuntimeError(f"contributor {c.id} failed at month {month_index}: {exc}") from exc
        ids.append(c.id)
    return DecisionPanel(month_index, tuple(ids), np.vstack(rows))


def lookahead_reward(env: PortfolioEnv, month_index: int, weights: np.ndarray, horizon: int) -> float:
    """Cumulative step reward of holding ``weights`` for the next H months."""
    p = env.params
    total = 0.0
    for j in range(month_index, month_index + horizon):
        roi, mdd, sigma = month_step_stats(env.slices[j], weights)
        total += p.alpha1 * roi - p.alpha2 * mdd - p.alpha3 * sigma
    return total


def collect_imitation_dataset(
    panels: list[DecisionPanel],
    env: PortfolioEnv,
    horizon: int,
) -> list[LookaheadSample]:
    """Label each panel month with its lookahead-best contributor.

    Months with fewer than ``horizon`` months remaining in the window are
    dropped; reward ties resolve to the lowest panel index.
    """
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    if not panels:
        raise ValueError("no panels to label")
    last_usable = env.window[1] - (horizon - 1)
    samples = []
    for panel in panels:
        t = panel.month_index
        if t < env.window[0] or t > last_usable:
            continue
        rewards = np.array(
            [lookahead_reward(env, t, panel.weights[i], horizon) for i in range(panel.weights.shape[0])]
        )
        best = int(np.argmax(rewards))  # argmax returns the first (lowest) index on ties
        samples.append(
            LookaheadSample(
                month_index=t,
                inputs=panel.concatenated.copy(),
                target=panel.weights[best].copy(),
                chosen_id=panel.contributor_ids[best],
                lookahead_reward=float(rewards[best]),
            )
        )
    if not samples:
        raise ValueError(f"window too short for lookahead horizon {horizon}")
    return samples


def _canonical_permutation(ids: tuple[str, ...]) -> list[int]:
    return sorted(range(len(ids)), key=lambda i: ids[i])


def _canonicalize_inputs(inputs: np.ndarray, ids: tuple[str, ...], n_assets: int) -> np.ndarray:
    blocks = inputs.reshape(len(ids), n_assets)
    return blocks[_canonical_permutation(ids)].reshape(-1)


def train_aggregator(
    samples: list[LookaheadSample],
    level: str,
    config: AggregatorConfig,
    contributor_ids: tuple[str, ...],
    contributor_checksums: tuple[str, ...] | None = None,
) -> AggregatorModel:
    """Fit the softmax network to the winning allocations.

    Runs ``epochs`` passes of seeded shuffled minibatch Adam on the MSE
    loss; epochs=0 returns the seeded initialization.
    """
    if not samples:
        raise ValueError("no training samples")
    n_assets = samples[0].target.size
    n_contrib = len(contributor_ids)
    if samples[0].inputs.size != n_contrib * n_assets:
        raise ValueError(
            f"input length {samples[0].inputs.size} != {n_contrib} contributors x {n_assets} assets"
        )
    X = np.vstack([_canonicalize_inputs(s.inputs, contributor_ids, n_assets) for s in samples])
    T = np.vstack([s.target for s in samples])
    batch_all = TrainBatch(X, T)

    net = init_mlp3(X.shape[1], n_assets, config.hidden1, config.hidden2, seed=config.seed, head="softmax")
    opt = OptimState.for_net(net, lr=config.lr)
    rng = np.random.default_rng(config.seed)
    for _ in range(config.epochs):
        order = rng.permutation(X.shape[0])
        for lo in range(0, X.shape[0], config.batch_size):
            idx = order[lo : lo + config.batch_size]
            grads = backward(net, TrainBatch(X[idx], T[idx]))
            net, opt = optim_step(net, grads, opt)
        loss = mse_loss(forward(net, X), T)
        if not np.isfinite(loss):
            raise FloatingPointError(f"{level}: non-finite training loss")
    final = mse_loss(forward(net, X), batch_all.targets)
    perm = _canonical_permutation(contributor_ids)
    checksums = tuple(contributor_checksums[i] for i in perm) if contributor_checksums else ("",) * n_contrib
    return AggregatorModel(
        net=net,
        level=level,
        contributor_ids=tuple(contributor_ids[i] for i in perm),
        contributor_checksums=checksums,
        config=config,
        final_loss=final,
    )


def aggregator_act(model: AggregatorModel, panel: DecisionPanel) -> np.ndarray:
    """Panel -> allocation; refuses a panel whose contributors mismatch."""
    if sorted(panel.contributor_ids) != list(model.contributor_ids):
        raise ValueError(
            f"{model.level}: panel contributors {sorted(panel.contributor_ids)} "
            f"do not match model manifest {list(model.contributor_ids)}"
        )
    x = _canonicalize_inputs(panel.concatenated, panel.contributor_ids, model.n_assets)
    return forward(model.net, x)


@dataclass
class Hierarchy:
    """Full three-tier stack ready for inference."""

    base_metrics: list[PolicyContributor]
    base_nlp: list[PolicyContributor]
    meta_metrics: AggregatorModel
    meta_nlp: AggregatorModel
    super_model: AggregatorModel
    meta_ids: tuple[str, str] = ("meta-metrics", "meta-nlp")

    def act(self, month_index: int, obs_by_mode: dict) -> np.ndarray:
        return hierarchy_act(
            self.super_model,
            {"meta-metrics": self.meta_metrics, "meta-nlp": self.meta_nlp},
            {"metrics": self.base_metrics, "nlp": self.base_nlp},
            month_index,
            obs_by_mode,
        )


def hierarchy_act(
    super_model: AggregatorModel,
    meta_models: dict[str, AggregatorModel],
    base_contributors: dict[str, list],
    month_index: int,
    obs_by_mode: dict,
) -> np.ndarray:
    """Base allocations -> meta panels -> meta allocations -> top allocation."""
    meta_level_contribs = []
    for mode in ("metrics", "nlp"):
        level = f"meta-{mode}"
        if level not in meta_models:
            raise ValueError(f"missing meta model for level {level}")
        if mode not in base_contributors or not base_contributors[mode]:
            raise ValueError(f"no base contributors for mode {mode}")
        meta_level_contribs.append(
            AggregatorContributor(meta_models[level], base_contributors[mode], contributor_id=level)
        )
    super_panel = build_panel(meta_level_contribs, month_index, obs_by_mode)
    try:
        return aggregator_act(super_model, super_panel)
    except ValueError as exc:
        raise ValueError(f"super level: {exc}") from exc
