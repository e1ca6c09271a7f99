import datetime as dt

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from hiport.data import (
    EmptyFileError,
    FillPolicy,
    PriceParseError,
    PriceTable,
    SchemaError,
    fill_missing,
    load_price_table,
    minmax_normalize,
    monthly_partition,
)


def write_csv(path, header, rows):
    lines = [",".join(header)] + [",".join(str(c) for c in row) for row in rows]
    path.write_text("\n".join(lines) + "\n")
    return path


def weekday_calendar(start: dt.date, end: dt.date) -> list[dt.date]:
    days, d = [], start
    while d <= end:
        if d.weekday() < 5:
            days.append(d)
        d += dt.timedelta(days=1)
    return days


class TestLoadPriceTable:
    def test_two_row_single_ticker(self, tmp_path):
        p = write_csv(tmp_path / "p.csv", ["date", "AAA"], [["2020-01-02", 100], ["2020-01-03", 101]])
        table = load_price_table(p, ["AAA"])
        assert table.prices.shape == (2, 1)
        assert table.calendar == (dt.date(2020, 1, 2), dt.date(2020, 1, 3))
        assert table.prices[0, 0] == 100.0

    def test_missing_column_named(self, tmp_path):
        p = write_csv(tmp_path / "p.csv", ["date", "AAA"], [["2020-01-02", 100]])
        with pytest.raises(SchemaError, match="GC=F"):
            load_price_table(p, ["AAA", "GC=F"])

    def test_extra_column_named(self, tmp_path):
        p = write_csv(tmp_path / "p.csv", ["date", "AAA", "BBB"], [["2020-01-02", 100, 1]])
        with pytest.raises(SchemaError, match="BBB"):
            load_price_table(p, ["AAA"])

    def test_fixture_generator_252x14(self, tmp_path):
        # Fixture built programmatically: 252 weekdays, 14 tickers in a
        # deliberately shuffled file column order.
        tickers = [f"T{i:02d}" for i in range(14)]
        cal = weekday_calendar(dt.date(2020, 1, 1), dt.date(2021, 1, 1))[:252]
        rng = np.random.default_rng(7)
        prices = 50 + rng.random((252, 14)) * 100
        file_order = list(tickers)
        rng.shuffle(file_order)
        rows = []
        for t, d in enumerate(cal):
            row = [d.isoformat()] + [f"{prices[t, tickers.index(tk)]:.6f}" for tk in file_order]
            rows.append(row)
        p = write_csv(tmp_path / "p.csv", ["date"] + file_order, rows)
        table = load_price_table(p, tickers)
        assert table.prices.shape == (252, 14)
        assert table.tickers == tuple(tickers)
        # values land under the declared ticker regardless of file order
        np.testing.assert_allclose(table.prices, np.round(prices, 6))

    def test_unsorted_rows_are_sorted(self, tmp_path):
        p = write_csv(
            tmp_path / "p.csv",
            ["date", "AAA"],
            [["2020-01-03", 101], ["2020-01-02", 100]],
        )
        table = load_price_table(p, ["AAA"])
        assert table.calendar[0] == dt.date(2020, 1, 2)

    def test_bad_date_reports_row(self, tmp_path):
        p = write_csv(tmp_path / "p.csv", ["date", "AAA"], [["2020-01-02", 100], ["not-a-date", 1]])
        with pytest.raises(PriceParseError, match="row 1"):
            load_price_table(p, ["AAA"])

    def test_bad_number_reports_row(self, tmp_path):
        p = write_csv(tmp_path / "p.csv", ["date", "AAA"], [["2020-01-02", "oops"]])
        with pytest.raises(PriceParseError, match="row 0"):
            load_price_table(p, ["AAA"])

    def test_empty_file(self, tmp_path):
        p = tmp_path / "p.csv"
        p.write_text("")
        with pytest.raises(EmptyFileError):
            load_price_table(p, ["AAA"])

    def test_header_only_file(self, tmp_path):
        p = write_csv(tmp_path / "p.csv", ["date", "AAA"], [])
        with pytest.raises(EmptyFileError):
            load_price_table(p, ["AAA"])

    def test_duplicate_date_rejected(self, tmp_path):
        p = write_csv(
            tmp_path / "p.csv",
            ["date", "AAA"],
            [["2020-01-02", 100], ["2020-01-02", 101]],
        )
        with pytest.raises(PriceParseError, match="duplicate date"):
            load_price_table(p, ["AAA"])

    def test_missing_cells_kept_as_nan(self, tmp_path):
        p = write_csv(
            tmp_path / "p.csv",
            ["date", "AAA", "BBB"],
            [["2020-01-02", 100, ""], ["2020-01-03", "", 7]],
        )
        table = load_price_table(p, ["AAA", "BBB"])
        assert np.isnan(table.prices[0, 1]) and np.isnan(table.prices[1, 0])


def make_table(cols: dict[str, list[float]], start=dt.date(2020, 1, 1)) -> PriceTable:
    n_rows = len(next(iter(cols.values())))
    cal = weekday_calendar(start, start + dt.timedelta(days=2 * n_rows + 10))[:n_rows]
    prices = np.array([[cols[t][r] for t in cols] for r in range(n_rows)], dtype=float)
    return PriceTable(tuple(cols), tuple(cal), prices)


class TestFillMissing:
    def test_forward_interior(self):
        t = make_table({"A": [10, np.nan, 14]})
        out = fill_missing(t, FillPolicy("forward"))
        np.testing.assert_array_equal(out.prices[:, 0], [10, 10, 14])

    def test_linear_interior(self):
        t = make_table({"A": [10, np.nan, 14]})
        out = fill_missing(t, FillPolicy("interpolate"))
        np.testing.assert_array_equal(out.prices[:, 0], [10, 12, 14])

    def test_leading_gap_backward(self):
        t = make_table({"A": [np.nan, 20, 30]})
        out = fill_missing(t, FillPolicy("forward"))
        np.testing.assert_array_equal(out.prices[:, 0], [20, 20, 30])

    def test_trailing_gap_forward(self):
        t = make_table({"A": [20, 30, np.nan]})
        out = fill_missing(t, FillPolicy("backward"))
        np.testing.assert_array_equal(out.prices[:, 0], [20, 30, 30])

    def test_backward_interior(self):
        t = make_table({"A": [10, np.nan, 14]})
        out = fill_missing(t, FillPolicy("backward"))
        np.testing.assert_array_equal(out.prices[:, 0], [10, 14, 14])

    def test_all_missing_asset_named(self):
        t = make_table({"A": [1, 2, 3], "B": [np.nan, np.nan, np.nan]})
        with pytest.raises(ValueError, match="B"):
            fill_missing(t, FillPolicy("forward"))

    def test_observed_values_unchanged(self):
        rng = np.random.default_rng(3)
        vals = 10 + rng.random(50)
        col = vals.copy()
        col[rng.choice(50, 15, replace=False)] = np.nan
        t = make_table({"A": list(col)})
        out = fill_missing(t, FillPolicy("interpolate"))
        obs = np.isfinite(col)
        np.testing.assert_array_equal(out.prices[obs, 0], col[obs])

    def test_linear_fill_stays_in_bracket(self):
        t = make_table({"A": [10, np.nan, np.nan, np.nan, 20]})
        out = fill_missing(t, FillPolicy("interpolate"))
        assert np.all(out.prices[:, 0] >= 10) and np.all(out.prices[:, 0] <= 20)

    @pytest.mark.parametrize("kind", ["forward", "backward", "interpolate"])
    def test_idempotent(self, kind):
        rng = np.random.default_rng(11)
        col = 5 + rng.random(30)
        col[[0, 4, 5, 29]] = np.nan
        t = make_table({"A": list(col)})
        once = fill_missing(t, FillPolicy(kind))
        twice = fill_missing(once, FillPolicy(kind))
        np.testing.assert_array_equal(once.prices, twice.prices)

    def test_unknown_kind_rejected(self):
        with pytest.raises(ValueError):
            FillPolicy("nearest")


class TestMinmaxNormalize:
    def test_simple(self):
        np.testing.assert_allclose(minmax_normalize(np.array([10, 20, 30])), [0, 0.5, 1])

    def test_constant_maps_to_half(self):
        np.testing.assert_array_equal(minmax_normalize(np.array([7.0, 7, 7])), [0.5, 0.5, 0.5])

    def test_random_series_against_direct_recompute(self):
        rng = np.random.default_rng(5)
        x = rng.normal(size=100)
        out = minmax_normalize(x)
        assert out.min() == 0.0 and out.max() == 1.0
        # independent recomputation, elementwise
        expected = (x - x.min()) / (x.max() - x.min())
        np.testing.assert_allclose(out, expected, atol=0)
        assert np.array_equal(np.argsort(out, kind="stable"), np.argsort(x, kind="stable"))

    @given(st.lists(st.floats(-1e6, 1e6), min_size=1, max_size=50))
    def test_idempotent_property(self, xs):
        x = np.array(xs)
        once = minmax_normalize(x)
        twice = minmax_normalize(once)
        np.testing.assert_allclose(twice, once, atol=1e-12)


class TestMonthlyPartition:
    def _dense_table(self, start: dt.date, end: dt.date, n_assets=2, seed=0) -> PriceTable:
        cal = weekday_calendar(start, end)
        rng = np.random.default_rng(seed)
        prices = 100 * np.exp(np.cumsum(rng.normal(0, 0.01, (len(cal), n_assets)), axis=0))
        return PriceTable(tuple(f"A{i}" for i in range(n_assets)), tuple(cal), prices)

    def test_two_months_boundary_chain(self):
        t = self._dense_table(dt.date(2020, 1, 1), dt.date(2020, 2, 28))
        slices = monthly_partition(t)
        assert [s.month for s in slices] == [(2020, 1), (2020, 2)]
        np.testing.assert_array_equal(slices[1].boundary, slices[0].prices[-1])
        np.testing.assert_array_equal(slices[0].boundary, slices[0].prices[0])

    def test_slice_lengths_match_calendar(self):
        t = self._dense_table(dt.date(2021, 1, 1), dt.date(2021, 2, 26))
        slices = monthly_partition(t)
        jan = [d for d in t.calendar if d.month == 1]
        feb = [d for d in t.calendar if d.month == 2]
        assert len(slices[0].dates) == len(jan)
        assert len(slices[1].dates) == len(feb)

    def test_264_months_2003_2024(self):
        t = self._dense_table(dt.date(2003, 1, 1), dt.date(2024, 12, 31))
        slices = monthly_partition(t)
        assert len(slices) == 264  # 22 years x 12 months
        assert slices[0].month == (2003, 1) and slices[-1].month == (2024, 12)

    def test_single_month_rejected(self):
        t = self._dense_table(dt.date(2020, 1, 1), dt.date(2020, 1, 31))
        with pytest.raises(ValueError, match="2 calendar months"):
            monthly_partition(t)

    def test_sparse_table_rejected(self):
        t = make_table({"A": [1, np.nan, 3]})
        with pytest.raises(ValueError, match="dense"):
            monthly_partition(t)

    def test_concat_reproduces_table(self):
        t = self._dense_table(dt.date(2019, 3, 1), dt.date(2020, 5, 29), n_assets=3, seed=4)
        slices = monthly_partition(t)
        dates = [d for s in slices for d in s.dates]
        prices = np.vstack([s.prices for s in slices])
        assert tuple(dates) == t.calendar
        np.testing.assert_array_equal(prices, t.prices)

    @settings(max_examples=25, deadline=None)
    @given(st.integers(2, 13), st.integers(0, 10))
    def test_boundary_chain_property(self, n_months, seed):
        start = dt.date(2015, 1, 1)
        end = start + dt.timedelta(days=31 * n_months)
        t = self._dense_table(start, end, seed=seed)
        slices = monthly_partition(t)
        for prev, cur in zip(slices, slices[1:]):
            np.testing.assert_array_equal(cur.boundary, prev.prices[-1])
            assert cur.with_boundary().shape[0] >= 2
