import csv

import numpy as np
import pytest

from sliceplots.figures import (InputError, ccdf_points, moving_average,
                                plot_ccdf, plot_dropped, plot_overhead,
                                plot_rewards)


def write_csv(path, header, rows):
    with open(path, "w", newline="") as f:
        w = csv.writer(f)
        w.writerow(header)
        w.writerows(rows)
    return path


METRICS = ["episode", "slice", "strategy", "mean_reward", "dropped_fraction",
           "offered_bits", "served_bits", "mean_latency_ms"]


@pytest.fixture
def metrics_csv(tmp_path):
    rows = []
    for ep in range(20):
        for sid in (0, 1):
            rows.append([ep, sid, "FDRL", 0.1 * ep, 0.5 / (ep + 1),
                         1000, 900, 5.0])
    return write_csv(tmp_path / "metrics.csv", METRICS, rows)


class TestMovingAverage:
    def test_window_one_is_identity(self):
        v = [3.0, 1.0, 4.0, 1.0, 5.0]
        assert moving_average(v, 1).tolist() == v

    def test_trailing_window(self):
        out = moving_average([1.0, 2.0, 3.0, 4.0], 2)
        assert out.tolist() == [1.0, 1.5, 2.5, 3.5]

    def test_short_prefix_averages_available(self):
        out = moving_average([2.0, 4.0, 6.0], 10)
        assert out.tolist() == [2.0, 3.0, 4.0]

    def test_empty(self):
        assert moving_average([], 5).size == 0


class TestCcdfPoints:
    def test_starts_at_one(self):
        xs, ys = ccdf_points([1.0, 2.0, 3.0])
        assert xs[0] == 0.0 and ys[0] == 1.0

    def test_monotone_non_increasing(self):
        rng = np.random.default_rng(5)
        _, ys = ccdf_points(rng.exponential(2.0, 500))
        assert np.all(np.diff(ys) <= 0)

    def test_all_equal_is_step(self):
        xs, ys = ccdf_points([4.0, 4.0, 4.0])
        assert xs.tolist() == [0.0, 4.0, 4.0, 4.0]
        assert ys[-1] == 0.0

    def test_exact_quantiles(self):
        _, ys = ccdf_points([1.0, 2.0, 3.0, 4.0])
        assert ys.tolist() == [1.0, 0.75, 0.5, 0.25, 0.0]


class TestRewardPlot:
    def test_writes_png(self, metrics_csv, tmp_path):
        out = plot_rewards(metrics_csv, tmp_path / "r.png")
        assert out.exists() and out.stat().st_size > 0

    def test_empty_csv_warns_but_renders(self, tmp_path, caplog):
        src = write_csv(tmp_path / "m.csv", METRICS, [])
        with caplog.at_level("WARNING"):
            out = plot_rewards(src, tmp_path / "r.png")
        assert out.exists()
        assert any("empty" in r.message for r in caplog.records)

    def test_missing_column_raises(self, tmp_path):
        src = write_csv(tmp_path / "m.csv", ["episode", "slice"], [])
        with pytest.raises(InputError, match="mean_reward"):
            plot_rewards(src, tmp_path / "r.png")

    def test_deterministic_bytes(self, metrics_csv, tmp_path):
        a = plot_rewards(metrics_csv, tmp_path / "a.png")
        b = plot_rewards(metrics_csv, tmp_path / "b.png")
        assert a.read_bytes() == b.read_bytes()


class TestDroppedPlot:
    def test_writes_png(self, metrics_csv, tmp_path):
        out = plot_dropped(metrics_csv, tmp_path / "d.png")
        assert out.exists() and out.stat().st_size > 0


class TestCcdfPlot:
    def test_writes_png(self, tmp_path):
        rows = [[0, 1.5], [0, 2.5], [1, 10.0], [1, 20.0]]
        src = write_csv(tmp_path / "lat.csv", ["slice", "latency_ms"], rows)
        out = plot_ccdf(src, tmp_path / "c.png")
        assert out.exists() and out.stat().st_size > 0


class TestOverheadPlot:
    def test_writes_png(self, tmp_path):
        rows = [[0, "FDRL", 4000, 4000], [0, "BestRep", 300, 4000]]
        src = write_csv(tmp_path / "o.csv",
                        ["episode", "strategy", "uplink_bytes",
                         "downlink_bytes"], rows)
        out = plot_overhead(src, tmp_path / "o.png")
        assert out.exists() and out.stat().st_size > 0
