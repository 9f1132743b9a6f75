"""Ingestion, transforms and persistence round trips."""

import math
import os

import numpy as np
import pytest

from tsgan import data_io
from tsgan.containers import PathBundle
from tsgan.data_io import PriceSeries


class TestLogReturns:
    def test_constant_prices(self):
        s = PriceSeries(dates=["a", "b", "c"], prices=[5.0, 5.0, 5.0])
        assert np.array_equal(data_io.to_log_returns(s), np.zeros(2))

    def test_unit_case(self):
        s = PriceSeries(dates=["a", "b"], prices=[1.0, math.e])
        assert data_io.to_log_returns(s) == pytest.approx([1.0], abs=1e-15)

    def test_exp_cumsum_inverse(self):
        rng = np.random.default_rng(0)
        prices = np.exp(rng.standard_normal(50).cumsum() * 0.01) * 100
        s = PriceSeries(dates=[f"{i:04d}" for i in range(50)], prices=prices)
        x = data_io.to_log_returns(s)
        rebuilt = prices[0] * np.exp(np.cumsum(x))
        assert np.abs(rebuilt - prices[1:]).max() <= 1e-12 * prices.max()

    def test_nonpositive_price_rejected(self):
        with pytest.raises(ValueError):
            PriceSeries(dates=["a", "b"], prices=[1.0, -2.0])


class TestDatasetStats:
    def test_normal_monte_carlo(self):
        x = np.random.default_rng(1).standard_normal(1_000_000)
        stats = data_io.dataset_stats(x)
        assert stats.length == 1_000_000
        assert stats.skewness == pytest.approx(0.0, abs=0.01)
        assert stats.kurtosis == pytest.approx(3.0, abs=0.02)

    def test_sp500_medium_kurtosis(self):
        path = os.environ.get("TSGAN_SP500_CSV")
        if not path or not os.path.exists(path):
            pytest.skip("set TSGAN_SP500_CSV to the 2009-05-01..2018-11-30 close file")
        x = data_io.to_log_returns(data_io.load_price_csv(path))
        stats = data_io.dataset_stats(x)
        assert stats.length == 2414
        assert stats.skewness == pytest.approx(-0.4667, abs=0.01)
        assert stats.kurtosis == pytest.approx(4.0648, abs=0.01)

    def test_sp500_high_kurtosis(self):
        path = os.environ.get("TSGAN_SP500_2020_CSV")
        if not path or not os.path.exists(path):
            pytest.skip("set TSGAN_SP500_2020_CSV to the 2009-05-01..2020-12-31 close file")
        x = data_io.to_log_returns(data_io.load_price_csv(path))
        stats = data_io.dataset_stats(x)
        assert stats.length == 2938
        assert stats.skewness == pytest.approx(-0.8132, abs=0.01)
        assert stats.kurtosis == pytest.approx(15.1333, abs=0.02)


class TestPriceCsv:
    def test_round_trip(self, tmp_path):
        s = PriceSeries(dates=["2020-01-01", "2020-01-02"], prices=[100.0, 101.5])
        path = tmp_path / "px.csv"
        data_io.save_price_csv(path, s)
        loaded = data_io.load_price_csv(path)
        assert loaded.dates == s.dates
        assert np.array_equal(loaded.prices, s.prices)

    def test_bad_header(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("time,px\n2020-01-01,100\n")
        with pytest.raises(ValueError, match="header"):
            data_io.load_price_csv(path)

    def test_nan_cell_named(self, tmp_path):
        path = tmp_path / "nan.csv"
        path.write_text("date,close\n2020-01-01,100\n2020-01-02,nan\n")
        with pytest.raises(ValueError, match="row 3"):
            data_io.load_price_csv(path)

    def test_nonmonotone_dates(self, tmp_path):
        path = tmp_path / "dates.csv"
        path.write_text("date,close\n2020-01-02,100\n2020-01-01,101\n")
        with pytest.raises(ValueError, match="increasing"):
            data_io.load_price_csv(path)


class TestSurfaceCsv:
    def header_28(self):
        return ["date"] + [f"{m}-{k}%" for k in (85, 90, 95, 100, 105, 110, 115)
                           for m in ("1m", "2m", "3m", "6m")]

    def write(self, path, header, n_rows=5, seed=2):
        rng = np.random.default_rng(seed)
        with open(path, "w") as fh:
            fh.write(",".join(header) + "\n")
            for i in range(n_rows):
                vols = rng.uniform(0.1, 0.5, size=len(header) - 1)
                fh.write(",".join([f"2020-01-{i+1:02d}"] + [repr(float(v)) for v in vols]) + "\n")

    def test_paper_grid_dimensions(self, tmp_path):
        path = tmp_path / "surf.csv"
        self.write(path, self.header_28())
        grid = data_io.load_surface_csv(path)
        assert grid.n_maturities == 4 and grid.n_strikes == 7 and grid.channels == 28
        assert np.allclose(grid.maturities, [1 / 12, 2 / 12, 3 / 12, 6 / 12])
        assert np.allclose(grid.strikes, [0.85, 0.90, 0.95, 1.00, 1.05, 1.10, 1.15])

    def test_header_driven_column_order(self, tmp_path):
        header = self.header_28()
        cols = header[1:]
        rng = np.random.default_rng(3)
        perm = list(rng.permutation(len(cols)))

        base, shuffled = tmp_path / "a.csv", tmp_path / "b.csv"
        rows = np.random.default_rng(4).uniform(0.1, 0.5, size=(4, 28))
        for path, order in ((base, range(len(cols))), (shuffled, perm)):
            with open(path, "w") as fh:
                fh.write(",".join(["date"] + [cols[i] for i in order]) + "\n")
                for r, row in enumerate(rows):
                    fh.write(",".join([f"2020-01-{r+1:02d}"]
                                      + [repr(float(row[i])) for i in order]) + "\n")
        g1 = data_io.load_surface_csv(base)
        g2 = data_io.load_surface_csv(shuffled)
        assert np.array_equal(g1.data, g2.data)
        assert np.array_equal(g1.strikes, g2.strikes)

    def test_values_are_logged(self, tmp_path):
        path = tmp_path / "surf.csv"
        header = ["date", "1m-100%"]
        path.write_text("date,1m-100%\n2020-01-01,0.25\n2020-01-02,0.30\n")
        grid = data_io.load_surface_csv(path)
        assert grid.data[0, 0] == pytest.approx(np.log(0.25), abs=1e-15)

    def test_round_trip(self, tmp_path):
        from tsgan import synthetic
        grid = synthetic.synthetic_surface_grid(6, seed=5)
        path = tmp_path / "surf.csv"
        data_io.save_surface_csv(path, grid)
        loaded = data_io.load_surface_csv(path)
        assert np.abs(loaded.data - grid.data).max() <= 1e-12
        assert np.allclose(loaded.strikes, grid.strikes)
        assert np.allclose(loaded.maturities, grid.maturities)

    def test_nan_cell_named(self, tmp_path):
        path = tmp_path / "surf.csv"
        path.write_text("date,1m-100%\n2020-01-01,nan\n")
        with pytest.raises(ValueError, match="1m-100%"):
            data_io.load_surface_csv(path)

    def test_bad_label(self, tmp_path):
        path = tmp_path / "surf.csv"
        path.write_text("date,oops\n2020-01-01,0.2\n")
        with pytest.raises(ValueError, match="bad column label"):
            data_io.load_surface_csv(path)


class TestBundleIo:
    def test_round_trip_bit_identical(self, tmp_path):
        rng = np.random.default_rng(6)
        paths = rng.standard_normal((4, 20, 3)).astype(np.float32)
        bundle = PathBundle(paths=paths, seed=42, model_id="ttgan")
        file = tmp_path / "bundle.bin"
        data_io.save_bundle(file, bundle)
        loaded = data_io.load_bundle(file)
        assert np.array_equal(loaded.paths, paths)
        assert loaded.seed == 42 and loaded.model_id == "ttgan"

    def test_save_load_save_stable(self, tmp_path):
        paths = np.random.default_rng(7).standard_normal((2, 8, 1)).astype(np.float32)
        f1, f2 = tmp_path / "a.bin", tmp_path / "b.bin"
        data_io.save_bundle(f1, PathBundle(paths=paths))
        data_io.save_bundle(f2, data_io.load_bundle(f1))
        assert f1.read_bytes() == f2.read_bytes()

    def test_truncated_rejected(self, tmp_path):
        file = tmp_path / "bundle.bin"
        data_io.save_bundle(file, PathBundle(paths=np.zeros((2, 4, 1), dtype=np.float32)))
        file.write_bytes(file.read_bytes()[:-8])
        with pytest.raises(ValueError, match="truncated"):
            data_io.load_bundle(file)
