import math
import struct

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gpc import lsq
from gpc.errors import BadData, InsufficientPoints, OrderTooHigh, Singular
from gpc.lsq import LineFailure, PolyFit, ScanLineSet
from gpc.parexec import ExecPlan

from oracles import explicit_inverse_solve


def scaled_coeffs(rng, m, n, amplitude=1000.0):
    """Coefficients whose terms are all of similar size over x in [0, n-1].

    This is the regime of real scan-line data (bounded intensities); with
    arbitrary O(1) coefficients the low-order terms sit below float64
    resolution of the high-order ones and cannot be recovered by any
    double-precision method.
    """
    signs = rng.choice([-1.0, 1.0], m + 1)
    return signs * rng.uniform(0.5, 1.5, m + 1) * amplitude / float(max(n - 1, 1)) ** np.arange(m + 1)


def poly(coeffs, x):
    return sum(c * x**k for k, c in enumerate(coeffs))


def test_power_sums_empty():
    assert lsq.power_sums([], 4).tolist() == [0.0] * 5


def test_power_sums_small():
    assert lsq.power_sums([1.0, 2.0, 3.0], 2)[2] == 14.0


def test_power_sums_scan_line_count():
    s = lsq.power_sums(np.arange(6000.0), 3)
    assert s[0] == 6000.0
    assert s[1] == math.fsum(range(6000))


def test_normal_system_hand_example():
    sys_ = lsq.build_normal_system([0, 1], [5, 5], 1)
    assert sys_.A.tolist() == [[2.0, 1.0], [1.0, 1.0]]
    assert sys_.B.tolist() == [10.0, 5.0]


def test_normal_system_order_zero():
    ys = [3.0, 4.5, -1.0]
    sys_ = lsq.build_normal_system([7, 8, 9], ys, 0)
    assert sys_.A.tolist() == [[3.0]]
    assert sys_.B.tolist() == [sum(ys)]


def test_normal_system_insufficient():
    with pytest.raises(InsufficientPoints):
        lsq.build_normal_system([0, 1], [1, 2], 2)


@given(st.integers(0, 6), st.integers(0, 2**32 - 1))
def test_normal_system_is_hankel(m, seed):
    rng = np.random.default_rng(seed)
    xs = rng.uniform(-3, 3, m + 5)
    A = lsq.build_normal_system(xs, rng.normal(size=xs.size), m).A
    assert A[0, 0] == xs.size
    assert np.array_equal(A, A.T)
    for j in range(m + 1):
        for k in range(m + 1):
            assert A[j, k] == A[max(0, j + k - m), min(j + k, m)]


def test_solve_identity():
    b = np.array([3.0, -1.0, 2.5])
    assert lsq.solve_linear(np.eye(3), b).tolist() == b.tolist()


def test_solve_hand_2x2():
    assert np.allclose(lsq.solve_linear([[2, 1], [1, 1]], [10, 5]), [5.0, 0.0], atol=1e-15)


def test_solve_needs_pivoting():
    x = lsq.solve_linear([[0.0, 1.0], [1.0, 0.0]], [2.0, 3.0])
    assert x.tolist() == [3.0, 2.0]


@pytest.mark.parametrize(
    "A",
    [np.zeros((3, 3)), [[1.0, 2.0], [2.0, 4.0]], [[1.0, 1.0, 1.0], [1.0, 1.0, 1.0], [0.0, 0.0, 1.0]]],
)
def test_solve_singular(A):
    with pytest.raises(Singular):
        lsq.solve_linear(A, np.ones(len(A)))


def test_solve_shape_mismatch():
    with pytest.raises(BadData):
        lsq.solve_linear(np.eye(3), [1.0, 2.0])


@settings(max_examples=60)
@given(st.integers(1, 9), st.integers(0, 2**32 - 1))
def test_solve_agrees_with_inverse_oracle(n, seed):
    rng = np.random.default_rng(seed)
    A = rng.normal(size=(n, n)) + n * np.eye(n)
    B = rng.normal(size=n)
    x = lsq.solve_linear(A, B)
    assert np.max(np.abs(x - explicit_inverse_solve(A.tolist(), B.tolist()))) <= 1e-8
    assert np.max(np.abs(A @ x - B)) <= 1e-8 * (1 + np.max(np.abs(B)))


def test_evaluate():
    assert lsq.evaluate(PolyFit(1, np.array([1.0, 2.0])), 3.0) == 7.0
    assert lsq.evaluate(PolyFit(0, np.array([0.0])), 12.5) == 0.0
    assert lsq.evaluate(PolyFit(2, np.array([1.0, 1.0, 1.0])), 2.0) == 7.0
    assert lsq.evaluate(PolyFit(0, np.array([0.1])), np.array([1.0, 1e300])).tolist() == [0.1, 0.1]


def test_sse_by_hand():
    fit = PolyFit(0, np.array([1.0]))
    assert lsq.sse(fit, [0.0, 1.0], [0.0, 2.0]) == 2.0


def test_fit_line_exact():
    x = np.arange(100.0)
    fit = lsq.polyfit(x, 2 * x + 1, 1)
    assert np.allclose(fit.coeffs, [1.0, 2.0], rtol=1e-9, atol=0)
    assert fit.sse <= 1e-18 * 100


def test_fit_constant():
    fit = lsq.polyfit(np.arange(10.0), np.full(10, 7.0), 0)
    assert fit.coeffs.tolist() == [7.0]
    assert fit.sse == 0.0


@given(st.lists(st.floats(-1e6, 1e6), min_size=1, max_size=200))
def test_order_zero_is_mean(ys):
    fit = lsq.polyfit(np.arange(float(len(ys))), ys, 0)
    mean = math.fsum(ys) / len(ys)
    assert abs(fit.coeffs[0] - mean) <= 1e-12 * max(abs(mean), max(map(abs, ys)))


def test_random_fit_matches_independent_minimizers():
    rng = np.random.default_rng(21)
    x = rng.uniform(-5, 5, 200)
    y = 3 - 2 * x + 0.5 * x**2 + rng.normal(0, 1, 200)
    fit = lsq.polyfit(x, y, 2)
    vander = np.vander(x, 3, increasing=True)
    ref, *_ = np.linalg.lstsq(vander, y, rcond=None)
    assert np.allclose(fit.coeffs, ref, rtol=1e-6, atol=0)
    A = [[math.fsum(x ** (j + k)) for k in range(3)] for j in range(3)]
    B = [math.fsum(x**j * y) for j in range(3)]
    assert np.allclose(fit.coeffs, explicit_inverse_solve(A, B), rtol=1e-6, atol=0)


def test_fit_is_local_minimum():
    rng = np.random.default_rng(5)
    x = np.arange(300.0)
    y = 40 + 0.3 * x - 1e-3 * x**2 + rng.normal(0, 2, x.size)
    fit = lsq.polyfit(x, y, 2)
    for j in range(3):
        for eps in (1e-3, -1e-3):
            c = fit.coeffs.copy()
            c[j] += eps * max(1.0, abs(c[j]))
            assert fit.sse <= lsq.sse(PolyFit(2, c), x, y)


def test_fit_errors():
    with pytest.raises(OrderTooHigh):
        lsq.polyfit(np.arange(20.0), np.arange(20.0), 9)
    with pytest.raises(Singular):
        lsq.polyfit(np.full(5, 3.0), np.arange(5.0), 1)
    with pytest.raises(InsufficientPoints):
        lsq.polyfit([0.0, 1.0], [0.0, 1.0], 2)
    with pytest.raises(BadData):
        lsq.polyfit([0.0, 1.0, 2.0], [0.0, np.nan, 1.0], 1)


# Raw power-sum systems at these sizes have a scaled condition number past
# 1e11, so float64 sums alone perturb the coefficients by more than 1e-6.
ILL_CONDITIONED = {(7, 6000), (8, 10), (8, 100), (8, 6000)}


def _recovery_cases():
    for m in range(0, 9):
        for n in (10, 100, 6000):
            marks = ()
            if (m, n) in ILL_CONDITIONED:
                marks = pytest.mark.xfail(reason="beyond float64 normal-equation accuracy", strict=True)
            yield pytest.param(m, n, marks=marks, id=f"m{m}-n{n}")


@pytest.mark.parametrize("m,n", list(_recovery_cases()))
def test_exact_recovery(m, n):
    rng = np.random.default_rng(n * 10 + m)
    x = np.arange(float(n))
    c = scaled_coeffs(rng, m, n)
    fit = lsq.polyfit(x, poly(c, x), m)
    assert np.max(np.abs(fit.coeffs - c) / np.abs(c)) <= 1e-6
    sys_ = lsq.build_normal_system(x, poly(c, x), m)
    assert np.max(np.abs(sys_.A @ fit.coeffs - sys_.B)) <= 1e-8 * (1 + np.max(np.abs(sys_.B)))


def test_batch_recovers_six_cubics():
    rng = np.random.default_rng(42)
    x = np.arange(6000.0)
    cs = [scaled_coeffs(rng, 3, 6000) for _ in range(6)]
    data = ScanLineSet.from_array([poly(c, x) for c in cs])
    fits = lsq.batch_fit(data, 3)
    for fit, c in zip(fits, cs):
        assert np.max(np.abs(fit.coeffs - c) / np.abs(c)) <= 1e-6


def test_batch_single_line_equals_polyfit():
    y = np.random.default_rng(1).normal(size=50)
    (fit,) = lsq.batch_fit(ScanLineSet.from_array([y]), 2)
    ref = lsq.polyfit(np.arange(50.0), y, 2)
    assert fit.coeffs.tobytes() == ref.coeffs.tobytes()
    assert fit.sse == ref.sse


def test_batch_is_bitwise_deterministic():
    y = np.random.default_rng(8).normal(size=(6, 6000)) * 100
    data = ScanLineSet.from_array(y)
    ref = lsq.fits_to_bytes(lsq.batch_fit(data, 3, ExecPlan(1)), 3)
    assert lsq.fits_to_bytes(lsq.batch_fit(data, 3, ExecPlan(8)), 3) == ref


def test_batch_isolates_bad_lines():
    y = np.random.default_rng(2).normal(size=(3, 20))
    y[1, 4] = np.inf
    fits = lsq.batch_fit(ScanLineSet.from_array(y), 1)
    assert isinstance(fits[1], LineFailure) and fits[1].line == 1
    assert isinstance(fits[0], PolyFit) and isinstance(fits[2], PolyFit)
    table = lsq.fits_from_bytes(lsq.fits_to_bytes(fits, 1), 3, 1)
    assert np.isnan(table[1]).all()
    assert table[0, :2].tolist() == fits[0].coeffs.tolist()
    assert table[0, 2] == fits[0].sse


def test_fits_payload_layout():
    fit = PolyFit(1, np.array([1.5, -2.0]), 0.25)
    raw = lsq.fits_to_bytes([fit], 1)
    assert raw == struct.pack("<3d", 1.5, -2.0, 0.25)


def test_scan_lines_from_bytes():
    y = np.arange(12, dtype="<f4").reshape(3, 4)
    data = ScanLineSet.from_bytes(y.tobytes(), 3, 4, "f32")
    assert data.y.dtype == np.float64
    assert data.y.tolist() == y.tolist()
    with pytest.raises(BadData):
        ScanLineSet.from_bytes(b"\0" * 8, 3, 4, "f64")
