import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from irrepsync.errors import UsageError
from irrepsync.evaluation import d_F, d_inf, error_report, optimal_gauge
from irrepsync.group import haar_matrices, so2_matrices


def gauge_grid_oracle(truth, est, step=1e-4):
    """Exact-gauge d_F and d_inf for SO(2) by scanning the gauge angle."""
    us = so2_matrices(np.arange(0.0, 2 * np.pi, step))
    resid = np.einsum("uab,nbc->unac", us, est) - truth[None]
    per_node = np.linalg.norm(resid, axis=(2, 3))
    n = truth.shape[0]
    f = np.sqrt(np.sum(per_node**2, axis=1)).min() / (2 * np.sqrt(2 * n))
    inf = per_node.max(axis=1).min() / (2 * np.sqrt(2))
    return f, inf


def test_identical_inputs(rng):
    r = haar_matrices("SO3", 10, rng)
    val, u = d_F(r, r)
    assert val < 1e-14 and np.abs(u - np.eye(3)).max() < 1e-12
    assert d_inf(r, r) < 1e-14


@pytest.mark.parametrize("group", ["SO2", "SO3"])
def test_gauge_shift(rng, group):
    r = haar_matrices(group, 10, rng)
    v = haar_matrices(group, 1, rng)[0]
    val, u = d_F(r, v @ r)
    assert val < 1e-10
    assert np.abs(u - v.T).max() < 1e-10
    assert d_inf(r, v @ r) < 1e-10


def test_against_gauge_grid(rng):
    for _ in range(5):
        truth, est = haar_matrices("SO2", 2, rng), haar_matrices("SO2", 2, rng)
        ref_f, ref_inf = gauge_grid_oracle(truth, est)
        assert d_F(truth, est)[0] == pytest.approx(ref_f, abs=1e-3)
        assert d_inf(truth, est) >= ref_inf - 1e-3


def test_single_flipped_node(rng):
    n = 100
    truth = haar_matrices("SO3", n, rng)
    est = truth.copy()
    flip = np.diag([1.0, -1.0, -1.0])  # rotation by pi about x
    est[17] = truth[17] @ flip
    assert d_inf(truth, est) == pytest.approx(np.sqrt(2.0 / 3.0), abs=0.02)
    assert d_F(truth, est)[0] < 0.1


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 30), st.integers(2, 3), st.integers(0, 2**31))
def test_bounds_and_left_invariance(n, d, seed):
    rng = np.random.default_rng(seed)
    group = f"SO{d}"
    truth, est = haar_matrices(group, n, rng), haar_matrices(group, n, rng)
    f, inf = d_F(truth, est)[0], d_inf(truth, est)
    assert -1e-12 <= f <= 1 + 1e-12 and -1e-12 <= inf <= 1 + 1e-12
    # unnormalized max >= unnormalized F-norm / sqrt(N) reduces to d_inf >= d_F
    assert inf >= f - 1e-12
    v = haar_matrices(group, 1, rng)[0]
    assert d_F(v @ truth, est)[0] == pytest.approx(f, abs=1e-10)
    assert d_inf(v @ truth, est) == pytest.approx(inf, abs=1e-10)


def test_report_and_errors(rng):
    truth = haar_matrices("SO3", 5, rng)
    v = haar_matrices("SO3", 1, rng)[0]
    rep = error_report(truth, v @ truth)
    assert rep.d_F < 1e-10 and rep.d_inf < 1e-10
    assert np.abs(rep.angular_errors).max() < 1e-6
    assert np.abs(rep.gauge.matrix() - optimal_gauge(truth, v @ truth)).max() < 1e-12
    out = rep.as_dict()
    assert set(out) >= {"d_F", "d_inf", "gauge", "angular_errors"}
    with pytest.raises(UsageError):
        d_F(truth, truth[:4])
    with pytest.raises(UsageError):
        d_inf(np.zeros((0, 3, 3)), np.zeros((0, 3, 3)))
