"""Local kernel timings: sequential baseline against each worker count.

Speedup follows the usual ratio: baseline time / comparison time, where
the baseline is the single-worker run and each figure is the median of
``repeats`` wall-clock measurements.
"""

from __future__ import annotations

import statistics
import time
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from gpc import demosaic, lsq
from gpc.parexec import ExecPlan

BENCH_TASKS = ("BAYER_BILINEAR", "BAYER_GRADIENT", "LSQ_POLYFIT")


@dataclass(frozen=True)
class BenchRow:
    task: str
    config: str
    workers: int
    median_s: float
    speedup: float

    def tsv(self) -> str:
        return f"{self.task}\t{self.config}\t{self.workers}\t{self.median_s * 1000:.3f}\t{self.speedup:.2f}"


TSV_HEADER = "task\tconfig\tworkers\tmedian_ms\tspeedup"


def speedup(baseline_s: float, comparison_s: float) -> float:
    """Execution time on the baseline divided by time on the comparison."""
    return baseline_s / comparison_s


def median_time(fn: Callable[[], object], repeats: int = 5) -> float:
    times = []
    for _ in range(repeats):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return statistics.median(times)


def _rows_for(task: str, config: str, kernel: Callable[[ExecPlan], object], workers_list, repeats) -> list[BenchRow]:
    base = median_time(lambda: kernel(ExecPlan(workers=1)), repeats)
    rows = [BenchRow(task, config, 1, base, 1.0)]
    for w in workers_list:
        if w == 1:
            continue
        t = median_time(lambda: kernel(ExecPlan(workers=w)), repeats)
        rows.append(BenchRow(task, config, w, t, speedup(base, t)))
    return rows


def bench_demosaic(
    task: str,
    mosaic: np.ndarray,
    workers_list: Sequence[int],
    repeats: int = 5,
    phase: str = demosaic.DEFAULT_PHASE,
) -> list[BenchRow]:
    img = demosaic.BayerImage.from_array(mosaic, phase)
    kernel = demosaic.demosaic_gradient if task == "BAYER_GRADIENT" else demosaic.demosaic_bilinear
    config = f"{img.rows}x{img.cols}"
    return _rows_for(task, config, lambda plan: kernel(img, plan), workers_list, repeats)


def bench_lsq(
    y: np.ndarray, orders: Sequence[int], workers_list: Sequence[int], repeats: int = 5
) -> list[BenchRow]:
    data = lsq.ScanLineSet.from_array(y)
    rows: list[BenchRow] = []
    for m in orders:
        config = f"{data.lines}x{data.pixels} order={m}"
        rows += _rows_for("LSQ_POLYFIT", config, lambda plan: lsq.batch_fit(data, m, plan), workers_list, repeats)
    return rows


def synthetic_mosaic(rows: int, cols: int, seed: int = 0) -> np.ndarray:
    return np.random.default_rng(seed).integers(0, 1 << 16, size=(rows, cols), dtype=np.uint16)


def synthetic_scanlines(lines: int, pixels: int, seed: int = 0) -> np.ndarray:
    rng = np.random.default_rng(seed)
    t = np.linspace(0.0, 1.0, pixels)
    base = 1000 + 500 * t - 300 * t**2 + 200 * t**3
    return base + rng.normal(0, 5, size=(lines, pixels))
