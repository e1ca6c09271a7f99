import json
from pathlib import Path

import pytest

from hiport.config import validate_config_dict
from hiport.pipeline import StageFailed, run_pipeline, verify_manifest
from hiport.synthetic import generate_price_csv

TICKERS = ("GSPC", "AAA", "BBB")


def small_config(tmp_path, **overrides):
    prices = tmp_path / "prices.csv"
    if not prices.exists():
        generate_price_csv(prices, TICKERS, "2010-01", "2013-12", seed=1)
    raw = {
        "seed": 0,
        "output_dir": str(tmp_path / "out"),
        "data": {"prices": str(prices), "fill": "forward", "sentiment": "simulate"},
        "universe": list(TICKERS),
        "windows": {"train": "2010-01:2012-12", "test": "2013-01:2013-12"},
        "agents": {"algorithms": ["ppo", "ddpg"], "episodes": 2, "hidden1": 16, "hidden2": 16},
        "seeds": "0..1",
        "hierarchy": {"lookahead": 2, "epochs": 5},
    }
    raw.update(overrides)
    return validate_config_dict(raw)


class TestFullRun:
    def test_artifact_cardinality_full_battery(self, tmp_path):
        cfg = small_config(
            tmp_path,
            agents={"algorithms": ["ppo", "sac", "ddpg", "td3"], "episodes": 1, "hidden1": 8, "hidden2": 8},
            seeds="0..4",
        )
        run_pipeline(cfg)
        manifest = json.loads((Path(cfg.output_dir) / "manifest.json").read_text())
        checkpoints = [a for a in manifest["artifacts"] if a.startswith("policies/")]
        assert len(checkpoints) == 40  # 4 algorithms x 2 modes x 5 seeds
        assert "meta-metrics.json" in manifest["artifacts"]
        assert "meta-nlp.json" in manifest["artifacts"]
        assert "super.json" in manifest["artifacts"]
        reports = json.loads((Path(cfg.output_dir) / "reports_test" / "reports.json").read_text())
        assert len(reports) >= 4

    def test_rerun_is_full_cache_hit(self, tmp_path):
        cfg = small_config(tmp_path)
        first = run_pipeline(cfg)
        assert first["cached"] == []
        second = run_pipeline(cfg)
        assert second["executed"] == []
        assert len(second["cached"]) == 8

    def test_headline_has_table_shape(self, tmp_path):
        cfg = small_config(tmp_path)
        run_pipeline(cfg)
        lines = (Path(cfg.output_dir) / "headline.csv").read_text().strip().splitlines()
        ids = [line.split(",")[0] for line in lines[1:]]
        assert ids == ["equal_weight", "index:GSPC", "meta-metrics", "meta-nlp", "super"]

    def test_changed_reward_reruns_training_not_ingest(self, tmp_path):
        cfg = small_config(tmp_path)
        run_pipeline(cfg)
        cfg2 = small_config(tmp_path, reward={"alpha1": 1.5})
        result = run_pipeline(cfg2)
        assert "ingest" in result["cached"]
        assert "sentiment" in result["cached"]
        assert "features" in result["cached"]
        assert "train-base" in result["executed"]

    def test_provided_sentiment_file(self, tmp_path):
        cfg = small_config(tmp_path)
        # first run produces a valid sentiment file we can feed back in
        run_pipeline(cfg)
        scores = tmp_path / "scores.csv"
        scores.write_text((Path(cfg.output_dir) / "sentiment.csv").read_text())
        out2 = tmp_path / "out2"
        cfg2 = small_config(tmp_path, output_dir=str(out2), data={
            "prices": str(tmp_path / "prices.csv"), "fill": "forward", "sentiment": str(scores),
        })
        run_pipeline(cfg2)
        assert (out2 / "sentiment.csv").read_text() == scores.read_text()


class TestFailureHandling:
    def test_bad_sentiment_file_fails_stage_retains_partial_manifest(self, tmp_path):
        bad = tmp_path / "bad_scores.csv"
        bad.write_text("month,ticker,score,n_articles\n2010-01,GSPC,7.0,1\n")
        cfg = small_config(tmp_path, data={
            "prices": str(tmp_path / "prices.csv"), "fill": "forward", "sentiment": str(bad),
        })
        with pytest.raises(StageFailed, match="sentiment"):
            run_pipeline(cfg)
        manifest = json.loads((Path(cfg.output_dir) / "manifest.json").read_text())
        assert "ingest" in manifest["stages"]
        assert "sentiment" not in manifest["stages"]

    def test_missing_prices_fails_ingest(self, tmp_path):
        cfg = small_config(tmp_path)
        cfg.prices_path = str(tmp_path / "nope.csv")
        with pytest.raises(FileNotFoundError):
            run_pipeline(cfg)


class TestManifestIntegrity:
    def test_verify_detects_tampering(self, tmp_path):
        cfg = small_config(tmp_path)
        run_pipeline(cfg)
        out = Path(cfg.output_dir)
        assert verify_manifest(out) == []
        target = out / "battery.json"
        target.write_text(target.read_text().replace("{", "{ ", 1))
        problems = verify_manifest(out)
        assert problems == ["battery.json: hash mismatch"]

    def test_verify_detects_deletion(self, tmp_path):
        cfg = small_config(tmp_path)
        run_pipeline(cfg)
        out = Path(cfg.output_dir)
        (out / "super.json").unlink()
        assert "super.json: missing" in verify_manifest(out)

    def test_fresh_runs_byte_identical_manifests(self, tmp_path, monkeypatch):
        # identical config with relative paths, two separate working dirs
        manifests = []
        for name in ("left", "right"):
            root = tmp_path / name
            root.mkdir()
            generate_price_csv(root / "prices.csv", TICKERS, "2010-01", "2012-12", seed=3)
            monkeypatch.chdir(root)
            cfg = validate_config_dict(
                {
                    "output_dir": "out",
                    "data": {"prices": "prices.csv"},
                    "universe": list(TICKERS),
                    "windows": {"train": "2010-01:2011-12", "test": "2012-01:2012-12"},
                    "agents": {"algorithms": ["ppo"], "episodes": 1, "hidden1": 8, "hidden2": 8},
                    "seeds": "0..1",
                    "hierarchy": {"lookahead": 2, "epochs": 2},
                }
            )
            run_pipeline(cfg)
            manifests.append((root / "out" / "manifest.json").read_bytes())
        assert manifests[0] == manifests[1]
