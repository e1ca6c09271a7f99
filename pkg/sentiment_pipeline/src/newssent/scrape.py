"""Polite article scraping with an on-disk cache.

For every search URL the first ``per_link_limit`` result links are fetched
in page order. Fetch failures become status records instead of dropped
rows, and every successful body is cached keyed by the URL's sha256, so a
rerun skips work already done.
"""

from __future__ import annotations

import hashlib
import logging
import time
from dataclasses import dataclass
from html.parser import HTMLParser
from pathlib import Path
from urllib.parse import urljoin

import requests

from .queries import DatedQuery

log = logging.getLogger(__name__)

USER_AGENT = "newssent/0.1 (research pipeline)"


@dataclass(frozen=True)
class ScrapedArticle:
    url: str
    month: str
    asset: str
    text: str
    status: str  # "ok" | "failed:<reason>" | "empty"

    @property
    def ok(self) -> bool:
        return self.status == "ok"


class _LinkCollector(HTMLParser):
    def __init__(self):
        super().__init__()
        self.hrefs: list[str] = []

    def handle_starttag(self, tag, attrs):
        if tag != "a":
            return
        for name, value in attrs:
            if name == "href" and value and not value.startswith("#"):
                self.hrefs.append(value)


class _TextCollector(HTMLParser):
    SKIP = {"script", "style", "noscript"}

    def __init__(self):
        super().__init__()
        self.chunks: list[str] = []
        self._skip_depth = 0

    def handle_starttag(self, tag, attrs):
        if tag in self.SKIP:
            self._skip_depth += 1

    def handle_endtag(self, tag):
        if tag in self.SKIP and self._skip_depth > 0:
            self._skip_depth -= 1

    def handle_data(self, data):
        if self._skip_depth == 0 and data.strip():
            self.chunks.append(data.strip())


def extract_links(html: str, base_url: str) -> list[str]:
    """Absolute result links in page order, deduplicated."""
    collector = _LinkCollector()
    collector.feed(html)
    seen, out = set(), []
    for href in collector.hrefs:
        absolute = urljoin(base_url, href)
        if absolute not in seen:
            seen.add(absolute)
            out.append(absolute)
    return out


def extract_text(html: str) -> str:
    collector = _TextCollector()
    collector.feed(html)
    return " ".join(collector.chunks)


class UrlCache:
    """Raw response bodies keyed by url sha256; makes scraping resumable."""

    def __init__(self, directory):
        self.dir = Path(directory)
        self.dir.mkdir(parents=True, exist_ok=True)

    def _path(self, url: str) -> Path:
        return self.dir / (hashlib.sha256(url.encode()).hexdigest() + ".html")

    def get(self, url: str) -> str | None:
        path = self._path(url)
        return path.read_text(errors="replace") if path.exists() else None

    def put(self, url: str, body: str) -> None:
        self._path(url).write_text(body)


class Fetcher:
    def __init__(self, cache: UrlCache, rate_limit_s: float = 0.5, timeout_s: float = 15.0):
        self.cache = cache
        self.rate_limit_s = rate_limit_s
        self.timeout_s = timeout_s
        self.session = requests.Session()
        self.session.headers["User-Agent"] = USER_AGENT
        self._last_fetch = 0.0

    def fetch(self, url: str) -> tuple[str | None, str]:
        """(body, status); body comes from cache when available."""
        cached = self.cache.get(url)
        if cached is not None:
            return cached, "ok"
        wait = self.rate_limit_s - (time.monotonic() - self._last_fetch)
        if wait > 0:
            time.sleep(wait)
        try:
            self._last_fetch = time.monotonic()
            resp = self.session.get(url, timeout=self.timeout_s)
        except requests.RequestException as exc:
            return None, f"failed:{type(exc).__name__}"
        if resp.status_code != 200:
            return None, f"failed:http{resp.status_code}"
        self.cache.put(url, resp.text)
        return resp.text, "ok"


def scrape_articles(
    queries: list[DatedQuery],
    cache_dir,
    per_link_limit: int = 10,
    rate_limit_s: float = 0.5,
) -> list[ScrapedArticle]:
    """Run every dated query and pull its first ``per_link_limit`` articles."""
    if per_link_limit < 1:
        raise ValueError("per_link_limit must be >= 1")
    fetcher = Fetcher(UrlCache(cache_dir), rate_limit_s)
    articles: list[ScrapedArticle] = []
    for query in queries:
        page, status = fetcher.fetch(query.url)
        if page is None:
            articles.append(ScrapedArticle(query.url, query.month, query.asset, "", status))
            continue
        links = extract_links(page, query.url)[:per_link_limit]
        log.debug("%s %s: %d links", query.asset, query.month, len(links))
        for link in links:
            body, link_status = fetcher.fetch(link)
            if body is None:
                articles.append(ScrapedArticle(link, query.month, query.asset, "", link_status))
                continue
            text = extract_text(body)
            articles.append(
                ScrapedArticle(
                    link,
                    query.month,
                    query.asset,
                    text,
                    "ok" if text else "empty",
                )
            )
    return articles
