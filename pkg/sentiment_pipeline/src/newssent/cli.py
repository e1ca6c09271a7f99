"""CLI: generate queries, scrape, score and export in one pass."""

from __future__ import annotations

import logging
import sys

import click

from .export import export_monthly_scores
from .queries import build_queries, load_asset_terms, month_range
from .score import lexicon_classifier, load_finbert_classifier, score_articles
from .scrape import scrape_articles


@click.group()
@click.option("-v", "--verbose", is_flag=True)
def main(verbose):
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        format="%(levelname)s %(name)s: %(message)s",
    )


@main.command()
@click.option("--assets", "assets_path", required=True, type=click.Path(exists=True),
              help="YAML mapping of asset id to search terms")
@click.option("--from", "start", required=True, help="first month, YYYY-MM")
@click.option("--to", "end", required=True, help="last month, YYYY-MM")
@click.option("--out", required=True, type=click.Path())
@click.option("--cache-dir", default=".newssent-cache", show_default=True)
@click.option("--per-link", default=10, show_default=True, help="articles per search page")
@click.option("--rate-limit", default=0.5, show_default=True, help="seconds between fetches")
@click.option("--search-base", default=None, help="override the search endpoint (fixtures)")
@click.option("--model-dir", default=None, type=click.Path(exists=True),
              help="local finance sentiment model directory")
@click.option("--classifier", "backend", default="finbert", show_default=True,
              type=click.Choice(["finbert", "lexicon"]),
              help="lexicon is a deterministic dev backend, not the published model")
def scrape(assets_path, start, end, out, cache_dir, per_link, rate_limit, search_base, model_dir, backend):
    """Scrape dated news, score sentiment, export the monthly CSV."""
    assets = load_asset_terms(assets_path)
    months = month_range(start, end)
    kwargs = {"base": search_base} if search_base else {}
    queries = build_queries(assets, months, **kwargs)
    click.echo(f"{len(queries)} dated queries ({len(assets)} assets x {len(months)} months)")

    articles = scrape_articles(queries, cache_dir, per_link_limit=per_link, rate_limit_s=rate_limit)
    ok = sum(a.ok for a in articles)
    click.echo(f"scraped {len(articles)} articles ({ok} ok, {len(articles) - ok} failed/empty)")

    if backend == "finbert":
        if not model_dir:
            click.echo("error: --model-dir is required for the finbert classifier", err=True)
            sys.exit(2)
        classifier = load_finbert_classifier(model_dir)
    else:
        classifier = lexicon_classifier
    scores, skipped = score_articles(articles, classifier)
    click.echo(f"scored {len(scores)} articles, skipped {len(skipped)}")

    rows = export_monthly_scores(scores, out)
    click.echo(f"wrote {rows} (month, asset) rows -> {out}")


if __name__ == "__main__":
    main()
