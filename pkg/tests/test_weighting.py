import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from wgmres.arnoldi import arnoldi_start
from wgmres.gmres import run_cycle
from wgmres.sparse import SparseMatrix, make_rng
from wgmres.transform import Transform
from wgmres.weighting import (
    InnerProduct,
    WeightKind,
    WeightStrategy,
    ip_dot,
    ip_norm,
    random_weights,
    weights_from_residual,
)


def test_residual_weight_examples():
    np.testing.assert_array_equal(weights_from_residual([3, 3]), [1, 1])
    np.testing.assert_array_equal(weights_from_residual([2, 1]), [1, 0.5])
    np.testing.assert_array_equal(weights_from_residual([2, 1], power=3), [1, 0.125])
    np.testing.assert_array_equal(weights_from_residual([1, 1e-20]), [1, 1e-10])


def test_power_zero_is_exactly_ones():
    w = weights_from_residual([5.0, 1e-30, -2.0, 0.0], power=0)
    assert w.tolist() == [1.0, 1.0, 1.0, 1.0]


def test_zero_residual_rejected():
    with pytest.raises(ValueError):
        weights_from_residual([0.0, 0.0])


@settings(max_examples=50, deadline=None)
@given(st.lists(st.floats(-1e6, 1e6, allow_nan=False), min_size=1, max_size=40),
       st.floats(0, 10))
def test_residual_weights_range(r, power):
    r = np.array(r)
    if not np.any(r != 0):
        return
    w = weights_from_residual(r, power)
    assert np.all(w >= 1e-10) and np.all(w <= 1)
    assert w.max() == 1.0
    assert w.max() / w.min() <= 1e10 * (1 + 1e-12)
    ip = InnerProduct(Transform.identity(len(r)), w)
    np.testing.assert_allclose(ip.sqrt_weights ** 2, w, rtol=1e-15)


def test_random_weights_ranges():
    w = random_weights(1000, 0.5, 1.5, make_rng(3))
    assert w.min() >= 0.5 and w.max() <= 1.5
    w = random_weights(1000, 0.0, 1.0, make_rng(3))
    assert w.min() >= 1e-10 and w.max() <= 1.0
    np.testing.assert_array_equal(random_weights(10, 0.5, 1.5, make_rng(9)),
                                  random_weights(10, 0.5, 1.5, make_rng(9)))
    with pytest.raises(ValueError):
        random_weights(3, 1.0, 1.0, make_rng(0))


def test_strategy_validation():
    with pytest.raises(ValueError):
        WeightStrategy(WeightKind.RESIDUAL, power=float("nan"))
    with pytest.raises(ValueError):
        WeightStrategy(WeightKind.RANDOM, lo=2, hi=1)


def test_ip_dot_examples():
    ip = InnerProduct(Transform.identity(2), [4.0, 1.0])
    assert ip_dot(ip, [1, 1], [1, 1]) == 5.0
    unit = InnerProduct(Transform.identity(2), [1.0, 1.0])
    assert ip_norm(unit, [3, 4]) == 5.0
    with pytest.raises(ValueError):
        ip_dot(ip, [1, 1, 1], [1, 1])


def test_ip_norm_positive_with_floor():
    ip = InnerProduct(Transform.identity(3), weights_from_residual([1, 0, 0]))
    assert ip_norm(ip, [0, 0, 1e-3]) > 0


@settings(max_examples=50, deadline=None)
@given(st.integers(1, 30), st.integers(0, 2**32 - 1))
def test_ip_symmetry_and_rayleigh_bound(n, seed):
    rng = np.random.default_rng(seed)
    ip = InnerProduct(Transform.identity(n), rng.uniform(1e-3, 1, n))
    x, y = rng.standard_normal(n), rng.standard_normal(n)
    assert ip_dot(ip, x, y) == pytest.approx(ip_dot(ip, y, x), rel=1e-13)
    ratio = ip_norm(ip, x) / np.linalg.norm(x)
    assert ip.s_min * (1 - 1e-13) <= ratio <= ip.s_max * (1 + 1e-13)


def test_power_zero_dot_bitwise_plain():
    rng = np.random.default_rng(2)
    x, y = rng.standard_normal(50), rng.standard_normal(50)
    ip = InnerProduct(Transform.identity(50), weights_from_residual(x, power=0))
    assert ip_dot(ip, x, y) == float(np.dot(x, y))


@pytest.mark.parametrize("c", [1e-3, 7.0])
def test_scaled_weights_give_same_residual_history(c):
    rng = np.random.default_rng(11)
    n = 30
    A = SparseMatrix.from_dense(rng.standard_normal((n, n)) + 5 * np.eye(n))
    b = rng.standard_normal(n)
    w = weights_from_residual(b, floor=0)
    out = []
    for weights in (w, c * w):
        ip = InnerProduct(Transform.identity(n), weights)
        arn = arnoldi_start(A, ip, b, capacity=11)
        hist = []
        run_cycle(A, ip, arn, np.array([ip.norm(b)]), 10, 0.0, lambda r2, rw: hist.append(r2))
        out.append(np.array(hist))
    np.testing.assert_allclose(out[1], out[0], rtol=1e-10)
