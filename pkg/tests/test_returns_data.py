import io

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from sparse_portfolio.returns_data import (
    DataError,
    PricePanel,
    ReturnsPanel,
    estimate_moments,
    load_prices,
    read_prices_csv,
    returns_to_prices,
    sector_sizes,
    synth_returns,
    to_returns,
)

from conftest import two_pass_moments

CSV = "date,AAA,BBB\n2020-01-01,100,50\n2020-01-02,110,50\n2020-01-03,99,55\n"


class TestLoadPrices:
    def test_three_rows_two_tickers(self):
        p = load_prices(CSV.encode())
        assert p.tickers == ("AAA", "BBB")
        assert p.prices.shape == (3, 2)
        assert p.dates[0] == "2020-01-01"

    def test_accepts_text_and_streams(self):
        a = load_prices(CSV)
        b = load_prices(io.BytesIO(CSV.encode()))
        c = load_prices(io.StringIO(CSV))
        for other in (b, c):
            np.testing.assert_array_equal(a.prices, other.prices)

    def test_zero_price_names_line(self):
        bad = CSV.replace("110,50", "0.0,50")
        with pytest.raises(DataError, match="line 3"):
            load_prices(bad)

    def test_duplicate_ticker(self):
        with pytest.raises(DataError, match="duplicate ticker"):
            load_prices("date,AAPL,AAPL\n2020-01-01,1,2\n")

    def test_header_must_start_with_date(self):
        with pytest.raises(DataError, match="line 1"):
            load_prices("day,A\nx,1\n")

    def test_ragged_row(self):
        with pytest.raises(DataError, match="line 2"):
            load_prices("date,A,B\n2020-01-01,1\n")

    def test_unparseable_cell(self):
        with pytest.raises(DataError, match="line 2.*'abc'"):
            load_prices("date,A\n2020-01-01,abc\n")

    def test_missing_price_is_error(self):
        with pytest.raises(DataError):
            load_prices("date,A,B\n2020-01-01,1,\n")

    def test_file_roundtrip(self, tmp_path):
        path = tmp_path / "p.csv"
        path.write_text(CSV)
        np.testing.assert_array_equal(read_prices_csv(path).prices, load_prices(CSV).prices)


class TestToReturns:
    def test_simple_returns(self):
        p = PricePanel(("a", "b", "c"), ("X",), np.array([[100.0], [110.0], [99.0]]))
        np.testing.assert_allclose(to_returns(p).returns[:, 0], [0.10, -0.10], atol=1e-15)

    def test_constant_prices(self):
        p = PricePanel(("a", "b"), ("X",), np.array([[50.0], [50.0]]))
        assert to_returns(p).returns.tolist() == [[0.0]]

    def test_single_row_rejected(self):
        p = PricePanel(("a",), ("X",), np.array([[50.0]]))
        with pytest.raises(DataError, match="at least 2"):
            to_returns(p)

    def test_load_then_convert_is_order_preserving(self):
        r1 = to_returns(load_prices(CSV))
        r2 = to_returns(load_prices(CSV))
        np.testing.assert_array_equal(r1.returns, r2.returns)
        assert r1.tickers == ("AAA", "BBB")
        np.testing.assert_allclose(r1.returns[:, 1], [0.0, 0.1])

    def test_prices_roundtrip(self):
        panel = synth_returns(4, 30, 2, seed=1)
        back = to_returns(returns_to_prices(panel))
        np.testing.assert_allclose(back.returns, panel.returns, atol=1e-12)


class TestEstimateMoments:
    def test_single_sample(self):
        m = estimate_moments(np.array([[0.1, 0.2]]))
        np.testing.assert_allclose(m.mu, [0.1, 0.2])
        np.testing.assert_array_equal(m.sigma, np.zeros((2, 2)))

    def test_symmetric_two_samples(self):
        m = estimate_moments(np.array([[1.0], [-1.0]]))
        assert m.mu[0] == 0.0
        assert m.sigma[0, 0] == 1.0

    def test_matches_two_pass_oracle(self, rng):
        R = rng.standard_normal((5, 3))
        mu, S = two_pass_moments(R)
        m = estimate_moments(R)
        np.testing.assert_allclose(m.mu, mu, atol=1e-12)
        np.testing.assert_allclose(m.sigma, S, atol=1e-12)

    def test_psd_on_random_directions(self, rng):
        m = estimate_moments(synth_returns(20, 15, 3, seed=2))
        for _ in range(100):
            x = rng.standard_normal(20)
            x /= np.linalg.norm(x)
            assert x @ m.sigma @ x >= -1e-10
        assert np.array_equal(m.sigma, m.sigma.T)

    @settings(max_examples=50, deadline=None)
    @given(arrays(float, st.tuples(st.integers(1, 12), st.integers(1, 6)),
                  elements=st.floats(-0.5, 0.5, allow_nan=False)))
    def test_equals_centered_gram(self, R):
        m = estimate_moments(R)
        Rc = R - R.mean(axis=0)
        np.testing.assert_allclose(m.sigma, Rc.T @ Rc / R.shape[0], atol=1e-12)
        assert np.linalg.eigvalsh(m.sigma).min() >= -1e-10


class TestSynth:
    def test_deterministic(self):
        a = synth_returns(10, 50, 2, seed=5)
        b = synth_returns(10, 50, 2, seed=5)
        assert np.array_equal(a.returns, b.returns)
        assert a.tickers == b.tickers and a.sectors == b.sectors

    def test_seeds_differ(self):
        assert not np.array_equal(synth_returns(10, 50, 2, seed=5).returns,
                                  synth_returns(10, 50, 2, seed=6).returns)

    def test_sector_correlation_structure(self):
        panel = synth_returns(65, 251, 7, seed=20180621)
        C = np.corrcoef(panel.returns.T)
        lab = np.array(panel.sectors)
        same = lab[:, None] == lab[None, :]
        off = ~np.eye(65, dtype=bool)
        assert C[same & off].mean() > C[~same].mean()

    def test_empty_sector_rejected(self):
        with pytest.raises(DataError, match="empty sector"):
            synth_returns(5, 10, [3, 0, 2])

    def test_sector_sizes(self):
        assert sector_sizes(65, 7) == [10, 10, 9, 9, 9, 9, 9]
        with pytest.raises(DataError):
            sector_sizes(3, 4)
        with pytest.raises(DataError):
            sector_sizes(5, [2, 2])

    def test_preconditions(self):
        with pytest.raises(DataError):
            synth_returns(0, 10)
        with pytest.raises(DataError):
            synth_returns(3, 1)


def test_panel_validation():
    with pytest.raises(DataError):
        ReturnsPanel(("a",), np.array([[np.nan]]))
    with pytest.raises(DataError):
        ReturnsPanel(("a", "b"), np.zeros((3, 1)))
    with pytest.raises(DataError):
        PricePanel(("d",), ("a",), np.array([[-1.0]]))
    panel = synth_returns(6, 10, 2, seed=0)
    sub = panel.subset([4, 1])
    assert sub.tickers == (panel.tickers[4], panel.tickers[1])
    np.testing.assert_array_equal(sub.returns, panel.returns[:, [4, 1]])
