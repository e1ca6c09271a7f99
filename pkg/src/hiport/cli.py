"""Command-line entry points, one subcommand per pipeline stage."""

from __future__ import annotations

import json
import logging
import sys
from pathlib import Path

import click

from .agents import Policy
from .backtest import BenchmarkSpec, benchmark_actor, policy_actor, run_backtest
from .config import ConfigError, RunConfig, validate_config
from .data import FILL_KINDS, FillPolicy, fill_missing, load_price_table, monthly_partition
from .pipeline import Pipeline, StageFailed, verify_manifest
from .sentiment import load_sentiment_table, save_sentiment_table, simulate_sentiment
from .synthetic import DEFAULT_TICKERS, generate_price_csv, write_price_csv


def _load_config(path: str) -> RunConfig:
    try:
        return validate_config(path)
    except ConfigError as exc:
        for err in exc.errors:
            click.echo(f"config error: {err}", err=True)
        sys.exit(2)


def _parse_window(text: str) -> tuple[str, str]:
    start, _, end = text.partition(":")
    if not end:
        raise click.BadParameter("expected YYYY-MM:YYYY-MM")
    return start, end


@click.group()
@click.option("-v", "--verbose", is_flag=True, help="debug logging")
def main(verbose):
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )


@main.command("synth-data")
@click.option("--out", required=True, type=click.Path())
@click.option("--seed", default=0, show_default=True)
@click.option("--start", "start_month", default="2003-01", show_default=True)
@click.option("--end", "end_month", default="2024-12", show_default=True)
@click.option("--tickers", default=",".join(DEFAULT_TICKERS), show_default=False, help="comma-separated")
def synth_data(out, seed, start_month, end_month, tickers):
    """Generate the bundled synthetic daily price panel."""
    names = tuple(t.strip() for t in tickers.split(",") if t.strip())
    generate_price_csv(out, names, start_month, end_month, seed)
    click.echo(f"wrote {out} ({len(names)} tickers, {start_month}..{end_month}, seed {seed})")


@main.command()
@click.option("--prices", required=True, type=click.Path(exists=True))
@click.option("--fill", default="forward", type=click.Choice(FILL_KINDS), show_default=True)
@click.option("--universe", default=None, help="comma-separated tickers; default: file header order")
@click.option("--out", default=None, type=click.Path(), help="write the cleaned table here")
def ingest(prices, fill, universe, out):
    """Load, clean and densify a price CSV."""
    if universe:
        tickers = [t.strip() for t in universe.split(",")]
    else:
        with open(prices) as fh:
            tickers = [c.strip() for c in fh.readline().strip().split(",")[1:]]
    table = load_price_table(prices, tickers)
    dense = fill_missing(table, FillPolicy(fill))
    months = monthly_partition(dense)
    click.echo(
        f"{len(dense.calendar)} days x {dense.n_assets} assets, "
        f"{len(months)} months ({months[0].key}..{months[-1].key})"
    )
    if out:
        write_price_csv(out, dense.tickers, dense.calendar, dense.prices)
        click.echo(f"wrote {out}")


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--mode", type=click.Choice(["metrics", "nlp"]), default="metrics", show_default=True)
def features(config_path, mode):
    """Emit per-month observation vectors (CSV + layout sidecar)."""
    cfg = _load_config(config_path)
    pipe = _stage_cli(cfg, "features")
    for suffix in (f"observations_{mode}.csv", f"layout_{mode}.json"):
        click.echo(f"wrote {pipe.out / suffix}")


@main.group()
def sentiment():
    """Sentiment score table utilities."""


@sentiment.command("simulate")
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--seed", default=None, type=int, help="override the derived seed")
@click.option("--lambda", "lam", default=None, type=float, help="signal strength in [0,1]")
@click.option("--out", required=True, type=click.Path())
def sentiment_simulate(config_path, seed, lam, out):
    """Synthesize a sentiment table from the configured price data."""
    from .config import derive_seed

    cfg = _load_config(config_path)
    table = load_price_table(cfg.prices_path, list(cfg.universe))
    dense = fill_missing(table, FillPolicy(cfg.fill))
    senti = simulate_sentiment(
        dense,
        seed=seed if seed is not None else derive_seed(cfg.seed, "sentiment"),
        signal_strength=lam if lam is not None else cfg.sentiment_signal_strength,
    )
    save_sentiment_table(senti, out)
    click.echo(f"wrote {out} ({len(senti.cells)} cells)")


@sentiment.command("validate")
@click.argument("path", type=click.Path(exists=True))
@click.option("--echo-json", is_flag=True, help="print the parsed table as canonical JSON")
def sentiment_validate(path, echo_json):
    """Check a sentiment CSV against the file contract."""
    table = load_sentiment_table(path)
    if echo_json:
        payload = {
            f"{month}/{ticker}": {"score": cell.score, "n_articles": cell.n_articles}
            for (month, ticker), cell in sorted(table.cells.items())
        }
        click.echo(json.dumps(payload, sort_keys=True))
    else:
        click.echo(f"ok: {len(table.cells)} cells")


def _stage_cli(cfg: RunConfig, upto: str) -> Pipeline:
    """Run pipeline stages through ``upto`` honoring the cache."""
    pipe = Pipeline(cfg)
    from .pipeline import STAGES

    runners = {
        "ingest": pipe.stage_ingest,
        "sentiment": pipe.stage_sentiment,
        "features": pipe.stage_features,
        "train-base": pipe.stage_train_base,
        "train-meta": pipe.stage_train_meta,
        "train-super": pipe.stage_train_super,
        "backtest": pipe.stage_backtest,
        "report": pipe.stage_report,
    }
    for stage in STAGES:
        pipe._run_stage(stage, pipe.fingerprint_for(stage), runners[stage])
        if stage == upto:
            break
    return pipe


@main.command("train-base")
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--algo", default=None, help="restrict to one algorithm")
@click.option("--mode", default=None, help="restrict to one mode")
@click.option("--seeds", default=None, help="override seed range, e.g. 0..4")
def train_base(config_path, algo, mode, seeds):
    """Train the base policy battery."""
    cfg = _load_config(config_path)
    if algo:
        cfg.algorithms = (algo,)
    if mode:
        cfg.modes = (mode,)
    if seeds:
        from .config import parse_seeds

        errs: list[str] = []
        parsed = parse_seeds(seeds, errs)
        if errs:
            raise click.BadParameter("; ".join(errs))
        cfg.seeds = parsed
    pipe = _stage_cli(cfg, "train-base")
    click.echo(f"trained {len(list(pipe.policies_dir().glob('*.json')))} policies")


@main.command("train-meta")
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--mode", type=click.Choice(["metrics", "nlp"]), default=None)
def train_meta(config_path, mode):
    """Train the per-mode aggregators (requires trained base policies)."""
    cfg = _load_config(config_path)
    if mode:
        cfg.modes = (mode,)
    _stage_cli(cfg, "train-meta")
    click.echo("meta aggregators trained")


@main.command("train-super")
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
def train_super(config_path):
    """Train the top-level aggregator (requires metas)."""
    cfg = _load_config(config_path)
    _stage_cli(cfg, "train-super")
    click.echo("top aggregator trained")


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
@click.option("--policy", "policy_ref", required=True,
              help="checkpoint path | equal | asset:TICKER")
@click.option("--window", required=True, help="YYYY-MM:YYYY-MM")
@click.option("--out", required=True, type=click.Path())
def backtest(config_path, policy_ref, window, out):
    """Backtest one policy or benchmark over a window."""
    cfg = _load_config(config_path)
    pipe = _stage_cli(cfg, "features")
    data = pipe.backtest_data()
    win = _parse_window(window)
    if policy_ref == "equal":
        actor, pid = benchmark_actor(BenchmarkSpec("equal_weight"), data), "equal_weight"
    elif policy_ref.startswith("asset:"):
        ticker = policy_ref.split(":", 1)[1]
        actor, pid = benchmark_actor(BenchmarkSpec("single_asset", ticker), data), f"index:{ticker}"
    else:
        policy = Policy.load(policy_ref)
        actor, pid = policy_actor(policy), policy.spec.label
    report = run_backtest(actor, win, data, pid)
    Path(out).write_text(json.dumps(report.to_json_dict(), sort_keys=True, indent=2))
    click.echo(
        f"{pid}: roi/yr {report.annualized_roi:.4f}, sharpe {report.annualized_sharpe:.3f}, "
        f"vol/yr {report.annualized_vol:.4f}, mdd {report.mdd:.4f} -> {out}"
    )


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
def report(config_path):
    """Regenerate the headline table from existing backtest reports."""
    cfg = _load_config(config_path)
    pipe = Pipeline(cfg)
    outputs = pipe.stage_report()
    click.echo((Path(outputs[0])).read_text())


@main.command()
@click.option("--config", "config_path", required=True, type=click.Path(exists=True))
def run(config_path):
    """Run the full pipeline with stage caching."""
    cfg = _load_config(config_path)
    try:
        result = Pipeline(cfg).run()
    except StageFailed as exc:
        click.echo(f"error: {exc}", err=True)
        sys.exit(1)
    click.echo(
        f"executed: {', '.join(result['executed']) or '(none)'}; "
        f"cached: {', '.join(result['cached']) or '(none)'}"
    )
    click.echo(f"manifest: {result['manifest']}")


@main.command()
@click.option("--out-dir", "out_dir", required=True, type=click.Path(exists=True))
def verify(out_dir):
    """Check every manifest artifact hash."""
    bad = verify_manifest(out_dir)
    if bad:
        for line in bad:
            click.echo(line, err=True)
        sys.exit(1)
    click.echo("all artifacts match the manifest")


if __name__ == "__main__":
    main()
