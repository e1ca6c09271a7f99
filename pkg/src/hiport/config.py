"""Run configuration: schema, defaults, validation, env overrides.

One YAML file drives the whole pipeline. Validation materializes every
default, rejects unknown keys (typo safety) and reports each problem with
its key path. Environment variables prefixed ``HIPORT_`` override keys for
CI, with ``__`` as the nesting separator (``HIPORT_REWARD__ALPHA1=2``).
"""

from __future__ import annotations

import hashlib
import os
from dataclasses import dataclass, field, asdict

import yaml

from .agents.common import ALGORITHMS, MODES, Hyperparams
from .data import FILL_KINDS, parse_month_key
from .env import RewardParams
from .synthetic import DEFAULT_TICKERS

ENV_PREFIX = "HIPORT_"


class ConfigError(ValueError):
    """Carries every validation problem with its key path."""

    def __init__(self, errors: list[str]):
        self.errors = list(errors)
        super().__init__("; ".join(self.errors))


@dataclass
class RunConfig:
    seed: int = 0
    output_dir: str = "out"
    prices_path: str = "prices.csv"
    fill: str = "forward"
    sentiment_source: str = "simulate"  # "simulate" or a scores CSV path
    sentiment_signal_strength: float = 0.0
    universe: tuple[str, ...] = DEFAULT_TICKERS
    train_window: tuple[str, str] = ("2003-01", "2017-12")
    test_window: tuple[str, str] = ("2018-01", "2024-12")
    reward: RewardParams = field(default_factory=RewardParams)
    algorithms: tuple[str, ...] = ("ppo", "sac", "ddpg", "td3")
    episodes: int = 300
    hyperparams: Hyperparams = field(default_factory=Hyperparams)
    seeds: tuple[int, ...] = (0, 1, 2, 3, 4)
    lookahead: int = 3
    agg_epochs: int = 200
    agg_batch_size: int = 32
    modes: tuple[str, ...] = ("metrics", "nlp")
    log_scale: bool = True

    def fingerprint_dict(self) -> dict:
        d = asdict(self)
        d["reward"] = asdict(self.reward)
        d["hyperparams"] = asdict(self.hyperparams)
        return d


def derive_seed(global_seed: int, component: str) -> int:
    """Stable per-component seed from the global seed."""
    digest = hashlib.sha256(f"{global_seed}:{component}".encode()).digest()
    return int.from_bytes(digest[:4], "big") % (2**31)


def parse_seeds(value, errors, path="seeds") -> tuple[int, ...]:
    if isinstance(value, str):
        if ".." not in value:
            errors.append(f"{path}: expected 'a..b' or a list, got {value!r}")
            return ()
        lo_s, hi_s = value.split("..", 1)
        try:
            lo, hi = int(lo_s), int(hi_s)
        except ValueError:
            errors.append(f"{path}: non-integer bound in {value!r}")
            return ()
        if lo > hi:
            errors.append(f"{path}: range start {lo} after end {hi}")
            return ()
        if lo < 0:
            errors.append(f"{path}: seeds must be >= 0")
            return ()
        return tuple(range(lo, hi + 1))
    if isinstance(value, list):
        out = []
        for k, v in enumerate(value):
            if not isinstance(v, int) or isinstance(v, bool) or v < 0:
                errors.append(f"{path}[{k}]: expected a nonnegative integer, got {v!r}")
                return ()
            out.append(v)
        return tuple(out)
    errors.append(f"{path}: expected 'a..b' or a list, got {type(value).__name__}")
    return ()


def parse_window(value, errors, path) -> tuple[str, str]:
    if not isinstance(value, str) or ":" not in value:
        errors.append(f"{path}: expected 'YYYY-MM:YYYY-MM', got {value!r}")
        return ("", "")
    start, end = value.split(":", 1)
    for part in (start, end):
        try:
            parse_month_key(part)
        except Exception:
            errors.append(f"{path}: bad month {part!r}")
            return ("", "")
    if start > end:
        errors.append(f"{path}: window start {start} after end {end}")
        return ("", "")
    return (start, end)


def _check_keys(section: dict, allowed: set[str], path: str, errors: list[str]) -> None:
    for key in section:
        if key not in allowed:
            errors.append(f"{path}{key}: unknown key")


def _apply_env_overrides(raw: dict) -> dict:
    for name, value in sorted(os.environ.items()):
        if not name.startswith(ENV_PREFIX):
            continue
        key_path = name[len(ENV_PREFIX) :].lower().split("__")
        node = raw
        for part in key_path[:-1]:
            node = node.setdefault(part, {})
            if not isinstance(node, dict):
                raise ConfigError([f"{'.'.join(key_path)}: env override into a non-mapping key"])
        node[key_path[-1]] = yaml.safe_load(value)
    return raw


def validate_config(path) -> RunConfig:
    """Load, override, validate and normalize; raises ConfigError on problems."""
    with open(path) as fh:
        raw = yaml.safe_load(fh) or {}
    if not isinstance(raw, dict):
        raise ConfigError(["top level: expected a mapping"])
    raw = _apply_env_overrides(raw)
    return validate_config_dict(raw)


def validate_config_dict(raw: dict) -> RunConfig:
    errors: list[str] = []
    cfg = RunConfig()

    _check_keys(
        raw,
        {"seed", "output_dir", "data", "universe", "windows", "reward", "agents", "seeds", "hierarchy", "modes", "report"},
        "",
        errors,
    )

    seed = raw.get("seed", 0)
    if not isinstance(seed, int) or isinstance(seed, bool) or seed < 0:
        errors.append(f"seed: expected a nonnegative integer, got {seed!r}")
        seed = 0

    output_dir = raw.get("output_dir", "out")

    data = raw.get("data", {}) or {}
    _check_keys(data, {"prices", "fill", "sentiment", "sentiment_signal_strength"}, "data.", errors)
    prices_path = data.get("prices", "prices.csv")
    fill = data.get("fill", "forward")
    if fill not in FILL_KINDS:
        errors.append(f"data.fill: unknown policy {fill!r}; expected one of {FILL_KINDS}")
    sentiment_source = data.get("sentiment", "simulate")
    lam = data.get("sentiment_signal_strength", 0.0)
    if not isinstance(lam, (int, float)) or not 0.0 <= float(lam) <= 1.0:
        errors.append(f"data.sentiment_signal_strength: {lam!r} outside [0, 1]")
        lam = 0.0

    universe = raw.get("universe", list(DEFAULT_TICKERS))
    if not isinstance(universe, list) or not universe or not all(isinstance(t, str) for t in universe):
        errors.append("universe: expected a nonempty list of ticker strings")
        universe = list(DEFAULT_TICKERS)
    if len(set(universe)) != len(universe):
        errors.append("universe: duplicate tickers")

    windows = raw.get("windows", {}) or {}
    _check_keys(windows, {"train", "test"}, "windows.", errors)
    train_window = parse_window(windows.get("train", "2003-01:2017-12"), errors, "windows.train")
    test_window = parse_window(windows.get("test", "2018-01:2024-12"), errors, "windows.test")
    if train_window[1] and test_window[0] and train_window[1] >= test_window[0]:
        errors.append(
            f"windows: train window must precede the test window without overlap "
            f"(train ends {train_window[1]}, test starts {test_window[0]})"
        )

    reward_raw = raw.get("reward", {}) or {}
    _check_keys(reward_raw, {"alpha1", "alpha2", "alpha3"}, "reward.", errors)
    alphas = {}
    for name, default in (("alpha1", 1.0), ("alpha2", 2.0), ("alpha3", 0.5)):
        v = reward_raw.get(name, default)
        if not isinstance(v, (int, float)) or float(v) < 0:
            errors.append(f"reward.{name}: expected a nonnegative number, got {v!r}")
            v = default
        alphas[name] = float(v)
    reward = None
    try:
        reward = RewardParams(**alphas)
    except ValueError as exc:
        errors.append(f"reward: {exc}")

    agents_raw = raw.get("agents", {}) or {}
    hp_field_names = set(Hyperparams.__dataclass_fields__)
    _check_keys(agents_raw, {"algorithms", "episodes"} | hp_field_names, "agents.", errors)
    algorithms = agents_raw.get("algorithms", list(ALGORITHMS))
    if not isinstance(algorithms, list) or not algorithms:
        errors.append("agents.algorithms: expected a nonempty list")
        algorithms = list(ALGORITHMS)
    for a in algorithms:
        if a not in ALGORITHMS:
            errors.append(f"agents.algorithms: unknown algorithm {a!r}")
    episodes = agents_raw.get("episodes", 300)
    if not isinstance(episodes, int) or isinstance(episodes, bool) or episodes < 0:
        errors.append(f"agents.episodes: expected an integer >= 0, got {episodes!r}")
        episodes = 300
    hp_kwargs = {k: v for k, v in agents_raw.items() if k in hp_field_names}
    try:
        hyperparams = Hyperparams(**hp_kwargs)
    except (TypeError, ValueError) as exc:
        errors.append(f"agents: {exc}")
        hyperparams = Hyperparams()

    seeds = parse_seeds(raw.get("seeds", "0..4"), errors)

    hier = raw.get("hierarchy", {}) or {}
    _check_keys(hier, {"lookahead", "epochs", "batch_size"}, "hierarchy.", errors)
    lookahead = hier.get("lookahead", 3)
    if not isinstance(lookahead, int) or isinstance(lookahead, bool) or lookahead < 1:
        errors.append(f"hierarchy.lookahead: expected an integer >= 1, got {lookahead!r}")
        lookahead = 3
    agg_epochs = hier.get("epochs", 200)
    if not isinstance(agg_epochs, int) or agg_epochs < 0:
        errors.append(f"hierarchy.epochs: expected an integer >= 0, got {agg_epochs!r}")
        agg_epochs = 200
    agg_batch = hier.get("batch_size", 32)
    if not isinstance(agg_batch, int) or agg_batch < 1:
        errors.append(f"hierarchy.batch_size: expected an integer >= 1, got {agg_batch!r}")
        agg_batch = 32

    modes = raw.get("modes", list(MODES))
    if not isinstance(modes, list) or not modes:
        errors.append("modes: expected a nonempty list")
        modes = list(MODES)
    for m in modes:
        if m not in MODES:
            errors.append(f"modes: unknown mode {m!r}")

    report_raw = raw.get("report", {}) or {}
    _check_keys(report_raw, {"log_scale"}, "report.", errors)
    log_scale = bool(report_raw.get("log_scale", True))

    if errors:
        raise ConfigError(errors)
    return RunConfig(
        seed=seed,
        output_dir=str(output_dir),
        prices_path=str(prices_path),
        fill=fill,
        sentiment_source=str(sentiment_source),
        sentiment_signal_strength=float(lam),
        universe=tuple(universe),
        train_window=train_window,
        test_window=test_window,
        reward=reward,
        algorithms=tuple(algorithms),
        episodes=episodes,
        hyperparams=hyperparams,
        seeds=seeds,
        lookahead=lookahead,
        agg_epochs=agg_epochs,
        agg_batch_size=agg_batch,
        modes=tuple(modes),
        log_scale=log_scale,
    )
