"""Least-squares polynomial fits through the normal equations.

For data ``(x_i, y_i)`` and order ``m`` the coefficients ``a_0..a_m``
solve ``A a = B`` with ``A[j][k] = sum x^(j+k)`` and ``B[j] = sum x^j y``.
All sums go through :func:`gpc.parexec.reduce_sum_array`, so results are
bitwise reproducible for any worker count.

Scan lines use ``x_i = i`` (0-based pixel index).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from gpc.errors import BadData, InsufficientPoints, OrderTooHigh, Singular, TaskFailed
from gpc.parexec import SEQUENTIAL, ExecPlan, parallel_map, reduce_sum_array

MAX_ORDER = 8
PIVOT_RTOL = 1e-12


@dataclass(frozen=True)
class ScanLineSet:
    lines: int
    pixels: int
    y: np.ndarray  # (lines, pixels) float64

    def __post_init__(self):
        if self.lines < 1:
            raise BadData("need at least one scan line")
        if self.pixels < 2:
            raise BadData("need at least two pixels per line")
        if self.y.shape != (self.lines, self.pixels):
            raise BadData(f"y shape {self.y.shape} != ({self.lines}, {self.pixels})")

    @classmethod
    def from_array(cls, y) -> "ScanLineSet":
        y = np.atleast_2d(np.asarray(y, dtype=np.float64))
        return cls(y.shape[0], y.shape[1], y)

    @classmethod
    def from_bytes(cls, data: bytes, lines: int, pixels: int, dtype: str = "f64") -> "ScanLineSet":
        fmt = {"f32": "<f4", "f64": "<f8"}[dtype]
        y = np.frombuffer(data, dtype=fmt).astype(np.float64)
        if y.size != lines * pixels:
            raise BadData(f"{y.size} samples cannot fill {lines}x{pixels}")
        return cls(lines, pixels, y.reshape(lines, pixels))

    @property
    def x(self) -> np.ndarray:
        return np.arange(self.pixels, dtype=np.float64)


@dataclass(frozen=True)
class NormalSystem:
    order: int
    A: np.ndarray
    B: np.ndarray


@dataclass(frozen=True)
class PolyFit:
    order: int
    coeffs: np.ndarray
    sse: float = 0.0

    def __call__(self, x):
        return evaluate(self, x)


@dataclass(frozen=True)
class LineFailure:
    """Stands in for a PolyFit when one line of a batch cannot be fitted."""

    line: int
    error: TaskFailed


def power_sums(xs, max_p: int, plan: ExecPlan | None = None) -> np.ndarray:
    xs = np.asarray(xs, dtype=np.float64)
    plan = plan or SEQUENTIAL
    return np.array([reduce_sum_array(xs**p, plan) for p in range(max_p + 1)])


def moment_sums(xs, ys, max_j: int, plan: ExecPlan | None = None) -> np.ndarray:
    xs = np.asarray(xs, dtype=np.float64)
    ys = np.asarray(ys, dtype=np.float64)
    plan = plan or SEQUENTIAL
    return np.array([reduce_sum_array(xs**j * ys, plan) for j in range(max_j + 1)])


def build_normal_system(xs, ys, m: int, plan: ExecPlan | None = None) -> NormalSystem:
    xs = np.asarray(xs, dtype=np.float64).ravel()
    ys = np.asarray(ys, dtype=np.float64).ravel()
    if xs.size != ys.size:
        raise BadData(f"{xs.size} abscissae but {ys.size} ordinates")
    if m < 0:
        raise BadData(f"order must be >= 0, got {m}")
    if xs.size < m + 1:
        raise InsufficientPoints(xs.size, m)
    S = power_sums(xs, 2 * m, plan)
    idx = np.arange(m + 1)
    A = S[idx[:, None] + idx[None, :]]
    B = moment_sums(xs, ys, m, plan)
    return NormalSystem(m, A, B)


def solve_linear(A, B) -> np.ndarray:
    """Gaussian elimination with partial pivoting.

    Raises Singular when a pivot falls below ``1e-12 * max|A|``.
    """
    a = np.array(A, dtype=np.float64)
    b = np.array(B, dtype=np.float64).ravel()
    n = b.size
    if a.shape != (n, n):
        raise BadData(f"matrix shape {a.shape} does not match vector of length {n}")
    if n == 0:
        return b
    tol = PIVOT_RTOL * np.abs(a).max()
    for k in range(n):
        p = k + int(np.argmax(np.abs(a[k:, k])))
        if not abs(a[p, k]) > tol:
            raise Singular(k)
        if p != k:
            a[[k, p]] = a[[p, k]]
            b[[k, p]] = b[[p, k]]
        for i in range(k + 1, n):
            f = a[i, k] / a[k, k]
            if f != 0.0:
                a[i, k:] -= f * a[k, k:]
                b[i] -= f * b[k]
    x = np.zeros(n)
    for k in range(n - 1, -1, -1):
        x[k] = (b[k] - a[k, k + 1 :] @ x[k + 1 :]) / a[k, k]
    return x


def solve_normal(system: NormalSystem) -> np.ndarray:
    # Symmetric diagonal scaling keeps the Hankel system solvable when
    # power sums span dozens of decades; the unknowns stay in the raw basis.
    A, B = system.A, system.B
    diag = np.diag(A)
    d = np.ones_like(diag)
    nz = diag > 0
    d[nz] = 1.0 / np.sqrt(diag[nz])
    z = solve_linear(A * d[:, None] * d[None, :], B * d)
    return z * d


def evaluate(fit: PolyFit, x):
    """Horner evaluation; works on scalars and arrays."""
    coeffs = fit.coeffs
    acc = np.zeros_like(np.asarray(x, dtype=np.float64)) + coeffs[-1]
    for a in coeffs[-2::-1]:
        acc = acc * x + a
    return acc if np.ndim(acc) else float(acc)


def sse(fit: PolyFit, xs, ys, plan: ExecPlan | None = None) -> float:
    xs = np.asarray(xs, dtype=np.float64)
    ys = np.asarray(ys, dtype=np.float64)
    if xs.shape != ys.shape:
        raise BadData("xs and ys differ in length")
    r = ys - evaluate(fit, xs)
    return reduce_sum_array(r * r, plan or SEQUENTIAL)


def polyfit(xs, ys, m: int, plan: ExecPlan | None = None) -> PolyFit:
    if m > MAX_ORDER:
        raise OrderTooHigh(m, MAX_ORDER)
    xs = np.asarray(xs, dtype=np.float64).ravel()
    ys = np.asarray(ys, dtype=np.float64).ravel()
    if not (np.isfinite(xs).all() and np.isfinite(ys).all()):
        raise BadData("data contains non-finite values")
    system = build_normal_system(xs, ys, m, plan)
    coeffs = solve_normal(system)
    fit = PolyFit(m, coeffs)
    err = sse(fit, xs, ys, plan)
    if not np.isfinite(coeffs).all() or not np.isfinite(err):
        raise BadData("fit overflowed")
    return PolyFit(m, coeffs, err)


def batch_fit(data: ScanLineSet, m: int, plan: ExecPlan | None = None) -> list[PolyFit | LineFailure]:
    """Fit every scan line independently, one line per parallel task.

    A line that cannot be fitted yields a LineFailure in its slot; the
    other lines are unaffected.
    """
    if m > MAX_ORDER:
        raise OrderTooHigh(m, MAX_ORDER)
    x = data.x

    def fit_line(i: int) -> PolyFit | LineFailure:
        try:
            return polyfit(x, data.y[i], m, SEQUENTIAL)
        except TaskFailed as exc:
            return LineFailure(i, exc)

    return parallel_map(data.lines, fit_line, plan)


def fits_to_bytes(fits: list[PolyFit | LineFailure], m: int) -> bytes:
    """Per line: a_0..a_m then the SSE, little-endian f64; failed lines are NaN."""
    out = np.full((len(fits), m + 2), np.nan)
    for i, fit in enumerate(fits):
        if isinstance(fit, PolyFit):
            out[i, :-1] = fit.coeffs
            out[i, -1] = fit.sse
    return out.astype("<f8").tobytes()


def fits_from_bytes(data: bytes, lines: int, m: int) -> np.ndarray:
    return np.frombuffer(data, dtype="<f8").reshape(lines, m + 2).copy()
