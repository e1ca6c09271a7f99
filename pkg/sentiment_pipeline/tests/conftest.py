import http.server
import threading
from functools import partial
from pathlib import Path

import pytest


class _QuietHandler(http.server.SimpleHTTPRequestHandler):
    def log_message(self, *args, **kwargs):
        pass


class FixtureServer:
    """Static HTTP server over a generated docroot, bound to a free port."""

    def __init__(self, docroot: Path):
        self.docroot = docroot
        handler = partial(_QuietHandler, directory=str(docroot))
        self.httpd = http.server.ThreadingHTTPServer(("127.0.0.1", 0), handler)
        self.thread = threading.Thread(target=self.httpd.serve_forever, daemon=True)
        self.thread.start()

    @property
    def base(self) -> str:
        host, port = self.httpd.server_address
        return f"http://{host}:{port}"

    def url(self, path: str) -> str:
        return f"{self.base}/{path.lstrip('/')}"

    def stop(self):
        self.httpd.shutdown()
        self.httpd.server_close()


def article_html(title: str, body: str) -> str:
    return (
        "<html><head><title>{t}</title><script>var junk=1;</script></head>"
        "<body><h1>{t}</h1><p>{b}</p></body></html>"
    ).format(t=title, b=body)


def search_html(links: list[str]) -> str:
    items = "".join(f'<li><a href="{href}">{href}</a></li>' for href in links)
    return f"<html><body><ul>{items}</ul></body></html>"


@pytest.fixture
def fixture_site(tmp_path):
    """Three search pages and a handful of articles, one link per flavor."""
    root = tmp_path / "site"
    root.mkdir()
    (root / "a1.html").write_text(article_html("Markets rally", "Stocks surged as profits beat expectations."))
    (root / "a2.html").write_text(article_html("Oil slumps", "Crude prices plunged on recession fear."))
    (root / "a3.html").write_text(article_html("Gold steady", "The metal held its range this month."))
    (root / "a4.html").write_text(article_html("Tech gains", "Record growth and strong earnings lifted shares."))
    (root / "search_jan.html").write_text(search_html(["a1.html", "a2.html"]))
    (root / "search_feb.html").write_text(search_html(["a3.html"]))
    (root / "search_mar.html").write_text(search_html(["a4.html", "missing.html"]))
    # a page with 25 result links, all resolving to the same article
    (root / "search_big.html").write_text(search_html([f"a1.html?n={k}" for k in range(25)]))
    server = FixtureServer(root)
    yield server
    server.stop()
