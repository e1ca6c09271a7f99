"""Article sentiment scoring.

The production classifier is a finance-tuned transformer loaded from a
local directory (weights are not bundled). Any callable mapping a list of
texts to (p_positive, p_negative, p_neutral) triples can stand in, which
keeps the rest of the pipeline testable offline.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

from .scrape import ScrapedArticle

log = logging.getLogger(__name__)

MAX_TOKENS = 512


@dataclass(frozen=True)
class ArticleScore:
    url: str
    month: str
    asset: str
    p_positive: float
    p_negative: float
    p_neutral: float

    def __post_init__(self):
        for p in (self.p_positive, self.p_negative, self.p_neutral):
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"probability {p} outside [0, 1]")
        total = self.p_positive + self.p_negative + self.p_neutral
        if abs(total - 1.0) > 1e-6:
            raise ValueError(f"probabilities sum to {total}")


def truncate_leading(text: str, max_tokens: int = MAX_TOKENS) -> str:
    """Keep the leading tokens; headlines and ledes carry the sentiment."""
    tokens = text.split()
    return " ".join(tokens[:max_tokens])


def load_finbert_classifier(model_dir: str):
    """Classifier backed by a locally stored finance sentiment model.

    Inference runs in no-grad eval mode so identical text scores
    identically. A missing or broken model directory is fatal.
    """
    try:
        import torch
        from transformers import AutoModelForSequenceClassification, AutoTokenizer
    except ImportError as exc:
        raise RuntimeError(f"transformer scoring needs the 'finbert' extra: {exc}") from exc
    try:
        tokenizer = AutoTokenizer.from_pretrained(model_dir, local_files_only=True)
        model = AutoModelForSequenceClassification.from_pretrained(model_dir, local_files_only=True)
    except Exception as exc:
        raise RuntimeError(f"cannot load sentiment model from {model_dir}: {exc}") from exc
    model.eval()
    labels = {v.lower(): k for k, v in model.config.id2label.items()}
    required = {"positive", "negative", "neutral"}
    if not required <= set(labels):
        raise RuntimeError(f"model labels {sorted(labels)} do not cover {sorted(required)}")

    def classify(texts: list[str]) -> list[tuple[float, float, float]]:
        with torch.no_grad():
            enc = tokenizer(texts, return_tensors="pt", padding=True, truncation=True, max_length=MAX_TOKENS)
            probs = torch.softmax(model(**enc).logits, dim=-1)
        return [
            (
                float(row[labels["positive"]]),
                float(row[labels["negative"]]),
                float(row[labels["neutral"]]),
            )
            for row in probs
        ]

    return classify


POSITIVE_WORDS = frozenset(
    "gain gains gained rally rallied surge surged soar soared beat beating up rise rose rising record profit profits strong bullish boom growth".split()
)
NEGATIVE_WORDS = frozenset(
    "loss losses lost fall fell falling drop dropped plunge plunged crash crashed down miss missed weak bearish slump recession fear cut".split()
)


def lexicon_classifier(texts: list[str]) -> list[tuple[float, float, float]]:
    """Deterministic keyword scorer for offline runs and fixtures.

    This is a development backend, not a substitute for the published
    finance model; probabilities are a smooth function of keyword counts.
    """
    out = []
    for text in texts:
        words = text.lower().split()
        pos = sum(w.strip(".,!?;:'\"()") in POSITIVE_WORDS for w in words)
        neg = sum(w.strip(".,!?;:'\"()") in NEGATIVE_WORDS for w in words)
        total = pos + neg
        if total == 0:
            out.append((0.1, 0.1, 0.8))
            continue
        strength = min(total, 8) / 8.0  # saturate long rants
        p_pos = 0.1 + 0.8 * strength * (pos / total)
        p_neg = 0.1 + 0.8 * strength * (neg / total)
        out.append((p_pos, p_neg, 1.0 - p_pos - p_neg))
    return out


def score_articles(
    articles: list[ScrapedArticle],
    classifier,
    batch_size: int = 16,
) -> tuple[list[ArticleScore], list[ScrapedArticle]]:
    """Score every ok article; returns (scores, skipped).

    Empty or failed articles are skipped with their status preserved. A
    per-article classifier failure is recorded and the batch continues.
    """
    scorable = [a for a in articles if a.ok and a.text.strip()]
    skipped = [a for a in articles if not (a.ok and a.text.strip())]
    scores: list[ArticleScore] = []
    for lo in range(0, len(scorable), batch_size):
        batch = scorable[lo : lo + batch_size]
        texts = [truncate_leading(a.text) for a in batch]
        try:
            triplets = classifier(texts)
        except Exception as exc:
            log.warning("classifier failed on batch at %d: %s; retrying per article", lo, exc)
            triplets = []
            for text in texts:
                try:
                    triplets.append(classifier([text])[0])
                except Exception as inner:
                    log.warning("article skipped after classifier error: %s", inner)
                    triplets.append(None)
        for art, triple in zip(batch, triplets):
            if triple is None:
                skipped.append(
                    ScrapedArticle(art.url, art.month, art.asset, art.text, "failed:classifier")
                )
                continue
            p_pos, p_neg, p_neu = triple
            scores.append(ArticleScore(art.url, art.month, art.asset, p_pos, p_neg, p_neu))
    return scores, skipped
