"""Deterministic data-parallel execution on a CPU thread pool.

Results never depend on the worker count: maps return values in index
order, and sums use a fixed summation tree (sequential within chunks of
``CHUNK`` elements, partials combined in ascending chunk order).
Kernels that hand numpy slices to the pool get real parallelism because
numpy releases the GIL inside its loops.
"""

from __future__ import annotations

import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence, TypeVar

import numpy as np

T = TypeVar("T")

CHUNK = 4096


def default_workers() -> int:
    return os.cpu_count() or 1


@dataclass(frozen=True)
class ExecPlan:
    workers: int = field(default_factory=default_workers)
    chunk: int = CHUNK

    def __post_init__(self):
        if self.workers < 1:
            raise ValueError(f"workers must be >= 1, got {self.workers}")
        if self.chunk < 1:
            raise ValueError(f"chunk must be >= 1, got {self.chunk}")

    @classmethod
    def from_env(cls, workers: int | None = None) -> "ExecPlan":
        """Explicit value, else ``GPC_WORKERS``, else host logical cores."""
        if workers is None:
            env = os.environ.get("GPC_WORKERS")
            workers = int(env) if env else default_workers()
        return cls(workers=workers)


SEQUENTIAL = ExecPlan(workers=1)


def _run_block(f: Callable[[int], T], start: int, stop: int):
    out = []
    for i in range(start, stop):
        try:
            out.append(f(i))
        except BaseException as exc:  # noqa: BLE001 - re-raised by the caller
            return out, (i, exc)
    return out, None


def parallel_map(n: int, f: Callable[[int], T], plan: ExecPlan | None = None) -> list[T]:
    """``[f(0), ..., f(n-1)]`` computed on ``plan.workers`` threads.

    If several indices fail, the exception from the lowest one is raised,
    whatever the schedule.
    """
    plan = plan or ExecPlan()
    if n <= 0:
        return []
    workers = min(plan.workers, n)
    if workers == 1:
        out, err = _run_block(f, 0, n)
        if err:
            raise err[1]
        return out

    # Contiguous blocks: each block stops at its own first failure, so the
    # minimum over blocks is the globally lowest failing index.
    bounds = np.linspace(0, n, workers + 1).astype(int)
    with ThreadPoolExecutor(max_workers=workers) as pool:
        futures = [
            pool.submit(_run_block, f, int(lo), int(hi))
            for lo, hi in zip(bounds[:-1], bounds[1:])
        ]
        blocks = [fut.result() for fut in futures]
    errors = [err for _, err in blocks if err]
    if errors:
        raise min(errors, key=lambda e: e[0])[1]
    return [x for out, _ in blocks for x in out]


def _combine(partials: Sequence[float]) -> float:
    total = 0.0
    for p in partials:
        total += p
    return total


def reduce_sum(n: int, f: Callable[[int], float], plan: ExecPlan | None = None) -> float:
    """Sum of ``f(i)`` over ``range(n)`` using the fixed chunked tree."""
    plan = plan or ExecPlan()
    chunk = plan.chunk

    def chunk_sum(k: int) -> float:
        s = 0.0
        for i in range(k * chunk, min((k + 1) * chunk, n)):
            s += f(i)
        return s

    nchunks = -(-n // chunk) if n > 0 else 0
    return _combine(parallel_map(nchunks, chunk_sum, plan))


def reduce_sum_array(values, plan: ExecPlan | None = None) -> float:
    """Vectorised :func:`reduce_sum` over a 1-D float64 array.

    Bitwise equal to ``reduce_sum(len(values), values.__getitem__)``:
    ``cumsum`` accumulates strictly left to right, and adding to ``0.0``
    reproduces the sequential start value (it maps ``-0.0`` to ``0.0``).
    """
    plan = plan or ExecPlan()
    values = np.asarray(values, dtype=np.float64).ravel()
    n = values.size
    chunk = plan.chunk

    def chunk_sum(k: int) -> float:
        part = values[k * chunk : (k + 1) * chunk]
        return 0.0 + float(np.cumsum(part)[-1])

    nchunks = -(-n // chunk) if n > 0 else 0
    return _combine(parallel_map(nchunks, chunk_sum, plan))
