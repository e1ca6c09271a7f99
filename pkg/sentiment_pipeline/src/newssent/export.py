"""Monthly aggregation and the shared sentiment CSV contract.

The score for a (month, asset) cell is the mean of (p_positive -
p_negative) over that cell's articles. Cells with no articles are omitted
entirely; the consuming engine fills them with a neutral zero.
"""

from __future__ import annotations

import csv
from collections import defaultdict

from .score import ArticleScore

CSV_HEADER = ("month", "ticker", "score", "n_articles")


def aggregate_scores(scores: list[ArticleScore]) -> dict[tuple[str, str], tuple[float, int]]:
    """(month, asset) -> (mean p_pos - p_neg, article count)."""
    cells: dict[tuple[str, str], list[float]] = defaultdict(list)
    for s in scores:
        cells[(s.month, s.asset)].append(s.p_positive - s.p_negative)
    return {
        key: (sum(vals) / len(vals), len(vals))
        for key, vals in cells.items()
    }


def export_monthly_scores(scores: list[ArticleScore], path) -> int:
    """Write the `month,ticker,score,n_articles` contract; rows sorted.

    Returns the number of rows written.
    """
    cells = aggregate_scores(scores)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_HEADER)
        for (month, asset), (score, count) in sorted(cells.items()):
            writer.writerow([month, asset, repr(score), count])
    return len(cells)
