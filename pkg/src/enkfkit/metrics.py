"""Accuracy metrics and wall-time accounting for assimilation runs."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


def rse(x_true: np.ndarray, x: np.ndarray) -> float:
    """Root square error sqrt(mean((x_true - x)^2))."""
    x_true = np.asarray(x_true, dtype=float)
    x = np.asarray(x, dtype=float)
    if x_true.shape != x.shape:
        raise ValueError(f"length mismatch: {x_true.shape} vs {x.shape}")
    diff = x_true - x
    return float(np.sqrt((diff @ diff) / diff.shape[0]))


def rmse(series) -> float:
    """Arithmetic mean of a sequence of root-square errors."""
    values = np.asarray(list(series), dtype=float)
    if values.size == 0:
        raise ValueError("cannot average an empty error series")
    return float(values.mean())


@dataclass
class CycleRecord:
    cycle: int
    time: float
    rse_forecast: float
    rse_analysis: float


@dataclass
class MetricSeries:
    """Per-cycle errors plus accumulated forecast/analysis wall times.

    Times are accumulated in integer nanoseconds from a monotonic clock
    and only converted to seconds in reports.
    """

    rows: list[CycleRecord] = field(default_factory=list)
    forecast_ns: int = 0
    analysis_ns: int = 0

    def add_cycle(self, cycle: int, time: float,
                  rse_forecast: float, rse_analysis: float):
        self.rows.append(CycleRecord(cycle, time, rse_forecast, rse_analysis))

    def add_forecast_time(self, ns: int):
        if ns < 0:
            raise ValueError("elapsed time cannot be negative")
        self.forecast_ns += ns

    def add_analysis_time(self, ns: int):
        if ns < 0:
            raise ValueError("elapsed time cannot be negative")
        self.analysis_ns += ns

    @property
    def forecast_seconds(self) -> float:
        return self.forecast_ns * 1e-9

    @property
    def analysis_seconds(self) -> float:
        return self.analysis_ns * 1e-9

    def analysis_rse_values(self) -> list[float]:
        return [row.rse_analysis for row in self.rows]

    def forecast_rse_values(self) -> list[float]:
        return [row.rse_forecast for row in self.rows]


def elapsed_report(series: MetricSeries) -> dict:
    """Forecast/analysis/total seconds; total is exactly the sum."""
    forecast_s = series.forecast_seconds
    analysis_s = series.analysis_seconds
    return {
        "forecast_s": forecast_s,
        "analysis_s": analysis_s,
        "total_s": forecast_s + analysis_s,
    }
