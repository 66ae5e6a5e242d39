import numpy as np
import pytest

from enkfkit.metrics import MetricSeries, elapsed_report, rmse, rse
from enkfkit.rng import make_rng


class TestRse:
    def test_zero_for_equal_vectors(self):
        x = np.arange(5.0)
        assert rse(x, x) == 0.0

    def test_unit_offset(self):
        assert rse(np.zeros(4), np.ones(4)) == 1.0

    def test_matches_two_pass_oracle(self):
        rng = make_rng(1)
        a = rng.standard_normal(30)
        b = rng.standard_normal(30)
        acc = 0.0
        for i in range(30):
            acc += (a[i] - b[i]) ** 2
        assert abs(rse(a, b) - np.sqrt(acc / 30)) <= 1e-14

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            rse(np.zeros(3), np.zeros(4))


class TestRmse:
    def test_single_entry(self):
        assert rmse([0.7]) == 0.7

    def test_two_entries(self):
        assert rmse([1.0, 3.0]) == 2.0

    def test_matches_naive_mean(self):
        rng = make_rng(2)
        vals = rng.uniform(0.0, 2.0, 100)
        assert abs(rmse(vals) - sum(vals) / 100) <= 1e-13

    def test_constant_series(self):
        assert rmse([0.42] * 17) == pytest.approx(0.42, abs=1e-15)

    def test_empty_rejected(self):
        with pytest.raises(ValueError):
            rmse([])


class TestElapsed:
    def test_zero_runs(self):
        report = elapsed_report(MetricSeries())
        assert report == {"forecast_s": 0.0, "analysis_s": 0.0, "total_s": 0.0}

    def test_total_is_exact_sum(self):
        series = MetricSeries()
        series.add_forecast_time(2_000_000_000)
        series.add_analysis_time(3_000_000_000)
        report = elapsed_report(series)
        assert report["forecast_s"] == 2.0
        assert report["analysis_s"] == 3.0
        assert report["total_s"] == report["forecast_s"] + report["analysis_s"]

    def test_clock_audit(self):
        import time

        series = MetricSeries()
        t0 = time.perf_counter_ns()
        x = sum(i * i for i in range(10_000))
        series.add_forecast_time(time.perf_counter_ns() - t0)
        assert x > 0
        report = elapsed_report(series)
        assert report["total_s"] == report["forecast_s"] + report["analysis_s"]
        assert report["forecast_s"] >= 0.0

    def test_negative_time_rejected(self):
        series = MetricSeries()
        with pytest.raises(ValueError):
            series.add_analysis_time(-1)
