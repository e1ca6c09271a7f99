import pytest

from newssent.export import aggregate_scores, export_monthly_scores
from newssent.score import ArticleScore


def score(p_pos, p_neg, month="2020-03", asset="GC=F", url="http://x/a"):
    return ArticleScore(url, month, asset, p_pos, p_neg, 1.0 - p_pos - p_neg)


class TestAggregate:
    def test_known_cell(self):
        cells = aggregate_scores([score(0.9, 0.05, url="u1"), score(0.2, 0.7, url="u2")])
        value, count = cells[("2020-03", "GC=F")]
        assert value == pytest.approx(0.175, abs=1e-15)
        assert count == 2

    def test_cells_grouped_by_month_and_asset(self):
        cells = aggregate_scores(
            [
                score(0.8, 0.1, month="2020-01", asset="A", url="u1"),
                score(0.1, 0.8, month="2020-01", asset="B", url="u2"),
                score(0.5, 0.2, month="2020-02", asset="A", url="u3"),
            ]
        )
        assert set(cells) == {("2020-01", "A"), ("2020-01", "B"), ("2020-02", "A")}

    def test_no_articles_no_cells(self):
        assert aggregate_scores([]) == {}


class TestExport:
    def test_schema_and_sorted_rows(self, tmp_path):
        out = tmp_path / "scores.csv"
        n = export_monthly_scores(
            [
                score(0.9, 0.05, month="2020-03", asset="GC=F", url="u1"),
                score(0.2, 0.7, month="2020-03", asset="GC=F", url="u2"),
                score(0.6, 0.1, month="2020-01", asset="AAA", url="u3"),
            ],
            out,
        )
        assert n == 2
        lines = out.read_text().strip().splitlines()
        assert lines[0] == "month,ticker,score,n_articles"
        assert lines[1].startswith("2020-01,AAA,")
        assert lines[2].startswith("2020-03,GC=F,0.17") and lines[2].endswith(",2")

    def test_empty_cells_omitted(self, tmp_path):
        out = tmp_path / "scores.csv"
        export_monthly_scores([score(0.5, 0.2)], out)
        lines = out.read_text().strip().splitlines()
        assert len(lines) == 2  # header + single populated cell
