"""Full-run orchestration with content-hash stage caching.

Each stage's fingerprint hashes the config subtree it depends on plus its
input artifacts; a stage is skipped when the stored fingerprint matches
and every recorded output is intact. The manifest carries no timestamps,
so two runs from identical config + inputs are byte-identical.
"""

from __future__ import annotations

import csv
import hashlib
import json
import logging
from pathlib import Path

import numpy as np

from .agents import Policy, run_seed_battery
from .backtest import (
    BacktestData,
    BenchmarkSpec,
    benchmark_actor,
    emit_report,
    hierarchy_actor,
    policy_actor,
    run_backtest,
)
from .config import RunConfig, derive_seed
from .data import FillPolicy, fill_missing, load_price_table, monthly_partition
from .env import PortfolioEnv, monthly_observations
from .hierarchy import (
    AggregatorConfig,
    AggregatorContributor,
    AggregatorModel,
    Hierarchy,
    PolicyContributor,
    build_panel,
    collect_imitation_dataset,
    train_aggregator,
)
from .sentiment import load_sentiment_table, save_sentiment_table, simulate_sentiment
from .synthetic import write_price_csv

log = logging.getLogger(__name__)

STAGES = ("ingest", "sentiment", "features", "train-base", "train-meta", "train-super", "backtest", "report")


def file_sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(65536), b""):
            h.update(chunk)
    return h.hexdigest()


def dict_sha256(payload: dict) -> str:
    return hashlib.sha256(json.dumps(payload, sort_keys=True).encode()).hexdigest()


class StageFailed(RuntimeError):
    def __init__(self, stage: str, cause: Exception):
        self.stage = stage
        self.cause = cause
        super().__init__(f"stage {stage} failed: {cause}")


class Pipeline:
    def __init__(self, config: RunConfig):
        self.cfg = config
        self.out = Path(config.output_dir)
        self.out.mkdir(parents=True, exist_ok=True)
        self.manifest_path = self.out / "manifest.json"
        self.manifest = self._load_manifest()
        self.executed: list[str] = []
        self.cached: list[str] = []
        # lazily rebuilt in-memory context
        self._table = None
        self._slices = None
        self._senti = None
        self._obs = None

    # -- manifest bookkeeping -------------------------------------------------

    def _load_manifest(self) -> dict:
        if self.manifest_path.exists():
            with open(self.manifest_path) as fh:
                return json.load(fh)
        return {"config": {}, "stages": {}, "artifacts": {}}

    def _write_manifest(self) -> None:
        self.manifest["config"] = self.cfg.fingerprint_dict()
        with open(self.manifest_path, "w") as fh:
            json.dump(self.manifest, fh, sort_keys=True, indent=2)

    def _record_outputs(self, stage: str, fingerprint: str, paths: list[Path]) -> None:
        rels = sorted(str(p.relative_to(self.out)) for p in paths)
        for rel in rels:
            self.manifest["artifacts"][rel] = file_sha256(self.out / rel)
        self.manifest["stages"][stage] = {"fingerprint": fingerprint, "outputs": rels}

    def _cache_hit(self, stage: str, fingerprint: str) -> bool:
        entry = self.manifest["stages"].get(stage)
        if not entry or entry["fingerprint"] != fingerprint:
            return False
        for rel in entry["outputs"]:
            path = self.out / rel
            if not path.exists() or file_sha256(path) != self.manifest["artifacts"].get(rel):
                return False
        return True

    def _artifact_hash(self, rel: str) -> str:
        # a missing upstream artifact still yields a stable fingerprint; the
        # stage itself will then fail with a meaningful error
        return self.manifest["artifacts"].get(rel, f"missing:{rel}")

    def _run_stage(self, stage: str, fingerprint: str, runner) -> None:
        if self._cache_hit(stage, fingerprint):
            self.cached.append(stage)
            log.info("stage %s: cache hit", stage)
            return
        log.info("stage %s: running", stage)
        try:
            outputs = runner()
        except Exception as exc:
            self._write_manifest()  # retain the partial manifest
            raise StageFailed(stage, exc) from exc
        self._record_outputs(stage, fingerprint, outputs)
        self._write_manifest()
        self.executed.append(stage)

    # -- shared context -------------------------------------------------------

    @property
    def clean_prices_path(self) -> Path:
        return self.out / "clean_prices.csv"

    @property
    def sentiment_path(self) -> Path:
        return self.out / "sentiment.csv"

    def table(self):
        if self._table is None:
            self._table = load_price_table(self.clean_prices_path, list(self.cfg.universe))
        return self._table

    def slices(self):
        if self._slices is None:
            self._slices = monthly_partition(self.table())
        return self._slices

    def senti(self):
        if self._senti is None:
            self._senti = load_sentiment_table(self.sentiment_path)
        return self._senti

    def observations(self) -> dict:
        if self._obs is None:
            self._obs = {}
            for mode in self.cfg.modes:
                senti = self.senti() if mode == "nlp" else None
                self._obs[mode] = monthly_observations(
                    self.slices(), mode, self.table().tickers, senti
                )
        return self._obs

    def backtest_data(self) -> BacktestData:
        return BacktestData(self.table().tickers, self.slices(), self.observations())

    def month_keys(self) -> list[str]:
        return [s.key for s in self.slices()]

    def window_indices(self, window: tuple[str, str]) -> tuple[int, int]:
        keys = self.month_keys()
        return keys.index(window[0]), keys.index(window[1])

    def train_env(self, mode: str) -> PortfolioEnv:
        return PortfolioEnv(
            self.slices(),
            self.observations()[mode],
            self.cfg.reward,
            self.window_indices(self.cfg.train_window),
        )

    # -- stages ---------------------------------------------------------------

    def stage_ingest(self) -> list[Path]:
        table = load_price_table(self.cfg.prices_path, list(self.cfg.universe))
        dense = fill_missing(table, FillPolicy(self.cfg.fill))
        write_price_csv(self.clean_prices_path, dense.tickers, dense.calendar, dense.prices)
        self._table = None
        return [self.clean_prices_path]

    def stage_sentiment(self) -> list[Path]:
        if self.cfg.sentiment_source == "simulate":
            senti = simulate_sentiment(
                self.table(),
                seed=derive_seed(self.cfg.seed, "sentiment"),
                signal_strength=self.cfg.sentiment_signal_strength,
            )
            save_sentiment_table(senti, self.sentiment_path)
        else:
            senti = load_sentiment_table(self.cfg.sentiment_source)  # validates the contract
            save_sentiment_table(senti, self.sentiment_path)
        self._senti = None
        return [self.sentiment_path]

    def stage_features(self) -> list[Path]:
        outputs = []
        for mode, obs_list in self.observations().items():
            csv_path = self.out / f"observations_{mode}.csv"
            with open(csv_path, "w", newline="") as fh:
                writer = csv.writer(fh)
                width = obs_list[0].values.size
                writer.writerow(["month", *(f"x{i}" for i in range(width))])
                for key, obs in zip(self.month_keys(), obs_list):
                    writer.writerow([key, *(repr(float(v)) for v in obs.values)])
            layout_path = self.out / f"layout_{mode}.json"
            layout = {
                "mode": mode,
                "tickers": list(self.table().tickers),
                "blocks": [
                    {"name": name, "start": start, "stop": stop}
                    for name, start, stop in obs_list[0].layout
                ],
            }
            layout_path.write_text(json.dumps(layout, sort_keys=True, indent=2))
            outputs += [csv_path, layout_path]
        return outputs

    def policies_dir(self) -> Path:
        return self.out / "policies"

    def stage_train_base(self) -> list[Path]:
        cfg = self.cfg
        data = self.backtest_data()

        def eval_roi(policy) -> float:
            report = run_backtest(policy_actor(policy), cfg.train_window, data, policy.spec.label)
            return report.annualized_roi

        battery = run_seed_battery(
            list(cfg.algorithms),
            list(cfg.modes),
            list(cfg.seeds),
            lambda mode: (lambda: self.train_env(mode)),
            cfg.episodes,
            eval_roi,
            cfg.hyperparams,
        )
        pdir = self.policies_dir()
        pdir.mkdir(exist_ok=True)
        outputs = []
        records = {}
        for (algo, mode, seed), cell in sorted(battery.cells.items()):
            label = f"{algo}-{mode}-s{seed}"
            if cell.policy is None:
                records[label] = {"error": cell.error}
                continue
            cell.policy.window = cfg.train_window
            path = pdir / f"{label}.json"
            cell.policy.save(path)
            outputs.append(path)
            records[label] = {
                "train_roi": cell.eval_roi,
                "checkpoint": str(path.relative_to(self.out)),
                "checksum": cell.policy.checksum(),
            }
        for algo in cfg.algorithms:
            for mode in cfg.modes:
                median = battery.median_cell(algo, mode)
                records[f"median:{algo}-{mode}"] = median.spec.label
        battery_path = self.out / "battery.json"
        battery_path.write_text(json.dumps(records, sort_keys=True, indent=2))
        outputs.append(battery_path)
        return outputs

    def load_policies(self, mode: str) -> list[Policy]:
        out = []
        for algo in self.cfg.algorithms:
            for seed in self.cfg.seeds:
                out.append(Policy.load(self.policies_dir() / f"{algo}-{mode}-s{seed}.json"))
        return out

    def _meta_contributors(self, mode: str) -> list[PolicyContributor]:
        return [PolicyContributor(p) for p in self.load_policies(mode)]

    def _agg_config(self, component: str) -> AggregatorConfig:
        cfg = self.cfg
        return AggregatorConfig(
            epochs=cfg.agg_epochs,
            batch_size=cfg.agg_batch_size,
            lookahead=cfg.lookahead,
            seed=derive_seed(cfg.seed, component),
            hidden1=cfg.hyperparams.hidden1,
            hidden2=cfg.hyperparams.hidden2,
        )

    def train_meta(self, mode: str) -> AggregatorModel:
        env = self.train_env(mode)
        contributors = self._meta_contributors(mode)
        obs = self.observations()
        i, j = self.window_indices(self.cfg.train_window)
        panels = [
            build_panel(contributors, t, {m: obs[m][t] for m in obs})
            for t in range(i, j + 1)
        ]
        samples = collect_imitation_dataset(panels, env, self.cfg.lookahead)
        return train_aggregator(
            samples,
            f"meta-{mode}",
            self._agg_config(f"meta-{mode}"),
            tuple(c.id for c in contributors),
            tuple(c.checksum() for c in contributors),
        )

    def stage_train_meta(self) -> list[Path]:
        outputs = []
        for mode in self.cfg.modes:
            model = self.train_meta(mode)
            path = self.out / f"meta-{mode}.json"
            model.save(path)
            outputs.append(path)
        return outputs

    def load_meta(self, mode: str) -> AggregatorModel:
        return AggregatorModel.load(self.out / f"meta-{mode}.json")

    def _super_contributors(self) -> list[AggregatorContributor]:
        return [
            AggregatorContributor(self.load_meta(mode), self._meta_contributors(mode), f"meta-{mode}")
            for mode in self.cfg.modes
        ]

    def stage_train_super(self) -> list[Path]:
        cfg = self.cfg
        env = self.train_env(cfg.modes[0])
        contributors = self._super_contributors()
        obs = self.observations()
        i, j = self.window_indices(cfg.train_window)
        panels = [
            build_panel(contributors, t, {m: obs[m][t] for m in obs}) for t in range(i, j + 1)
        ]
        samples = collect_imitation_dataset(panels, env, cfg.lookahead)
        model = train_aggregator(
            samples,
            "super",
            self._agg_config("super"),
            tuple(c.id for c in contributors),
            tuple(c.checksum() for c in contributors),
        )
        path = self.out / "super.json"
        model.save(path)
        return [path]

    def hierarchy(self) -> Hierarchy:
        return Hierarchy(
            base_metrics=self._meta_contributors("metrics"),
            base_nlp=self._meta_contributors("nlp"),
            meta_metrics=self.load_meta("metrics"),
            meta_nlp=self.load_meta("nlp"),
            super_model=AggregatorModel.load(self.out / "super.json"),
        )

    def index_ticker(self) -> str:
        return "GSPC" if "GSPC" in self.cfg.universe else self.cfg.universe[0]

    def _actors_for_reports(self) -> list[tuple[str, object]]:
        data = self.backtest_data()
        actors: list[tuple[str, object]] = [
            ("equal_weight", benchmark_actor(BenchmarkSpec("equal_weight"), data)),
            (f"index:{self.index_ticker()}", benchmark_actor(BenchmarkSpec("single_asset", self.index_ticker()), data)),
        ]
        battery = json.loads((self.out / "battery.json").read_text())
        for algo in self.cfg.algorithms:
            for mode in self.cfg.modes:
                label = battery[f"median:{algo}-{mode}"]
                policy = Policy.load(self.policies_dir() / f"{label}.json")
                actors.append((f"{algo}-{mode}(median)", policy_actor(policy)))
        if "metrics" in self.cfg.modes and "nlp" in self.cfg.modes:
            stack = self.hierarchy()
            meta_m = AggregatorContributor(stack.meta_metrics, stack.base_metrics, "meta-metrics")
            meta_n = AggregatorContributor(stack.meta_nlp, stack.base_nlp, "meta-nlp")
            actors.append(("meta-metrics", lambda t, obs: meta_m.decide(t, obs)))
            actors.append(("meta-nlp", lambda t, obs: meta_n.decide(t, obs)))
            actors.append(("super", hierarchy_actor(stack)))
        return actors

    def stage_backtest(self) -> list[Path]:
        cfg = self.cfg
        data = self.backtest_data()
        fingerprint = {
            "alphas": [cfg.reward.alpha1, cfg.reward.alpha2, cfg.reward.alpha3],
            "seeds": list(cfg.seeds),
            "lookahead": cfg.lookahead,
            "global_seed": cfg.seed,
        }
        outputs = []
        for name, window in (("train", cfg.train_window), ("test", cfg.test_window)):
            reports = [
                run_backtest(actor, window, data, policy_id, fingerprint)
                for policy_id, actor in self._actors_for_reports()
            ]
            files = emit_report(reports, self.out / f"reports_{name}", log_scale=cfg.log_scale)
            outputs += [Path(p) for p in files.values()]
        return outputs

    def stage_report(self) -> list[Path]:
        """Headline table over the test window: benchmarks, metas, super."""
        reports = json.loads((self.out / "reports_test" / "reports.json").read_text())
        by_id = {r["policy_id"]: r for r in reports}
        rows = [["policy", "annualized_roi_pct", "annualized_sharpe", "annualized_vol_pct"]]
        wanted = ["equal_weight", f"index:{self.index_ticker()}", "meta-metrics", "meta-nlp", "super"]
        for pid in wanted:
            if pid not in by_id:
                continue
            m = by_id[pid]["metrics"]
            rows.append(
                [
                    pid,
                    f"{100 * m['annualized_roi']:.1f}",
                    f"{m['annualized_sharpe']:.2f}",
                    f"{100 * m['annualized_vol']:.1f}",
                ]
            )
        path = self.out / "headline.csv"
        with open(path, "w", newline="") as fh:
            csv.writer(fh).writerows(rows)
        return [path]

    # -- driver ---------------------------------------------------------------

    def fingerprint_for(self, stage: str) -> str:
        """Hash of the stage's config subtree plus its input artifacts.

        Later stages reference artifact hashes recorded by earlier ones, so
        this must be computed only once its predecessors have run (or hit
        their cache).
        """
        cfg = self.cfg
        if stage == "ingest":
            payload = {
                "prices": file_sha256(cfg.prices_path),
                "fill": cfg.fill,
                "universe": list(cfg.universe),
            }
        elif stage == "sentiment":
            simulate = cfg.sentiment_source == "simulate"
            payload = {
                "clean": self._artifact_hash("clean_prices.csv"),
                "source": "simulate" if simulate else cfg.sentiment_source,
                "source_hash": "" if simulate else file_sha256(cfg.sentiment_source),
                "lambda": cfg.sentiment_signal_strength,
                "seed": derive_seed(cfg.seed, "sentiment"),
            }
        elif stage == "features":
            payload = {
                "clean": self._artifact_hash("clean_prices.csv"),
                "sentiment": self._artifact_hash("sentiment.csv"),
                "modes": list(cfg.modes),
            }
        elif stage == "train-base":
            payload = {
                "features": [self._artifact_hash(f"observations_{m}.csv") for m in cfg.modes],
                "algorithms": list(cfg.algorithms),
                "seeds": list(cfg.seeds),
                "episodes": cfg.episodes,
                "hyperparams": cfg.fingerprint_dict()["hyperparams"],
                "reward": cfg.fingerprint_dict()["reward"],
                "train_window": list(cfg.train_window),
            }
        elif stage == "train-meta":
            payload = {
                "battery": self._artifact_hash("battery.json"),
                "policies": [
                    self._artifact_hash(f"policies/{a}-{m}-s{s}.json")
                    for a in cfg.algorithms
                    for m in cfg.modes
                    for s in cfg.seeds
                ],
                "lookahead": cfg.lookahead,
                "epochs": cfg.agg_epochs,
                "batch": cfg.agg_batch_size,
                "seed": cfg.seed,
            }
        elif stage == "train-super":
            payload = {
                "metas": [self._artifact_hash(f"meta-{m}.json") for m in cfg.modes],
                "lookahead": cfg.lookahead,
                "epochs": cfg.agg_epochs,
                "batch": cfg.agg_batch_size,
                "seed": cfg.seed,
            }
        elif stage == "backtest":
            payload = {
                "super": self._artifact_hash("super.json"),
                "metas": [self._artifact_hash(f"meta-{m}.json") for m in cfg.modes],
                "battery": self._artifact_hash("battery.json"),
                "windows": [list(cfg.train_window), list(cfg.test_window)],
                "log_scale": cfg.log_scale,
            }
        elif stage == "report":
            payload = {"reports": self._artifact_hash("reports_test/reports.json")}
        else:
            raise ValueError(f"unknown stage {stage!r}")
        return dict_sha256(payload)

    def run(self) -> dict:
        runners = {
            "ingest": self.stage_ingest,
            "sentiment": self.stage_sentiment,
            "features": self.stage_features,
            "train-base": self.stage_train_base,
            "train-meta": self.stage_train_meta,
            "train-super": self.stage_train_super,
            "backtest": self.stage_backtest,
            "report": self.stage_report,
        }
        for stage in STAGES:
            fp = self.fingerprint_for(stage)
            self._run_stage(stage, fp, runners[stage])
        return {"executed": self.executed, "cached": self.cached, "manifest": str(self.manifest_path)}


def run_pipeline(config: RunConfig) -> dict:
    return Pipeline(config).run()


def verify_manifest(out_dir) -> list[str]:
    """Return artifacts whose content no longer matches the manifest."""
    out = Path(out_dir)
    with open(out / "manifest.json") as fh:
        manifest = json.load(fh)
    bad = []
    for rel, digest in sorted(manifest["artifacts"].items()):
        path = out / rel
        if not path.exists():
            bad.append(f"{rel}: missing")
        elif file_sha256(path) != digest:
            bad.append(f"{rel}: hash mismatch")
    return bad
