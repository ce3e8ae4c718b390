import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from sklearn.base import clone

from meanlb.distributions import nishiyama_triple
from meanlb.estimator import (
    EmpiricalMean,
    MedianOfMeans,
    MinKLMeanEstimator,
    TrimmedMean,
    baseline_estimate,
    dhat_L,
    dhat_R,
    minkl_estimate,
    parse_estimator,
    y_schedule,
)
from meanlb.exceptions import ConfigError, DomainError


def _y_mp(n, delta):
    mp.mp.dps = 50
    return (mp.exp((mp.mpf(2) / n) * mp.log(2 * mp.e * (n + 1) ** 2 / mp.mpf(delta))) - 1) / 2


@pytest.mark.parametrize("n,delta", [(100, 0.01), (1, 0.5), (30, 0.1), (20, 0.1), (5000, 1e-9)])
def test_y_schedule_mpmath(n, delta):
    assert y_schedule(n, delta) == pytest.approx(float(_y_mp(n, delta)), rel=1e-14)


def test_y_schedule_frozen():
    assert y_schedule(100, 0.01) == pytest.approx(0.1821020, abs=1e-7)
    assert y_schedule(1, 0.5) == pytest.approx(945.29918, abs=1e-5)
    assert y_schedule(30, 0.1) == pytest.approx(0.5315886, abs=1e-7)


def test_y_schedule_vanishes():
    assert y_schedule(10**9, 0.1) < 1e-6


def test_y_schedule_domain():
    with pytest.raises(DomainError):
        y_schedule(10, 1.0)
    with pytest.raises(DomainError):
        y_schedule(0, 0.1)


def test_dhat_zero_for_large_c():
    x = np.array([-2.0, -1.0, 0.0, 1.0, 2.0])
    assert dhat_L(x, 50.0, 0.3) == 0.0


def test_dhat_symmetric_pair():
    x = np.array([-1.0, 1.0] * 25)
    assert dhat_L(x, 0.0, 0.1) == pytest.approx(dhat_R(x, 0.0, 0.1), abs=1e-12)


def _two_atom_oracle(y, c):
    """min KL(delta_1, F) over F = w delta_1 + (1-w) delta_a with E_F <= c - sqrt(2 y Var_F).

    For each atom ``a`` the feasible weights form an interval ``[0, w*]``
    (found by bisection); ``a`` is searched on a coarse grid and then on a
    fine grid around the best coarse point. The infimum may only be
    approached as ``a -> -inf``, hence the far geometric grid.
    """
    def best_w(a):
        def lhs(w):
            mean = w + (1 - w) * a
            var = w * (1 - w) * (1 - a) ** 2
            return mean + math.sqrt(2 * y * var) - c

        if lhs(0.0) > 0:
            return 0.0
        lo, hi = 0.0, 0.85
        if lhs(hi) <= 0:
            return hi
        for _ in range(80):
            mid = 0.5 * (lo + hi)
            lo, hi = (mid, hi) if lhs(mid) <= 0 else (lo, mid)
        return lo

    coarse = np.concatenate([np.linspace(-60.0, 1.0, 6001), -np.geomspace(60, 1e9, 400)])
    ws = np.array([best_w(a) for a in coarse])
    a0 = coarse[int(np.argmax(ws))]
    fine = np.linspace(a0 - 0.05 * abs(a0), min(a0 + 0.05 * abs(a0), 1.0), 20001)
    return -math.log(max(ws.max(), max(best_w(a) for a in fine)))


def test_two_point_sample_against_brute_force():
    x = np.array([1.0, 1.0])
    value = dhat_L(x, 0.0, 0.5)
    assert value == pytest.approx(_two_atom_oracle(0.5, 0.0), abs=1e-4)


def test_dhat_monotone_in_c():
    rng = np.random.default_rng(3)
    x = rng.standard_t(3, size=15)
    cs = np.linspace(x.min() - 1, x.max() + 1, 25)
    left = [dhat_L(x, c, 0.4) for c in cs]
    right = [dhat_R(x, c, 0.4) for c in cs]
    assert all(b <= a + 1e-9 for a, b in zip(left, left[1:]))
    assert all(b >= a - 1e-9 for a, b in zip(right, right[1:]))


def test_constant_sample():
    est = minkl_estimate(np.full(7, 2.5), 0.3)
    assert est == 2.5


def test_symmetric_about_three():
    rng = np.random.default_rng(8)
    h = rng.exponential(size=10)
    x = np.concatenate([3 + h, 3 - h])
    tol = 1e-6 * (1 + np.ptp(x))
    assert abs(minkl_estimate(x, 0.5) - 3.0) <= tol


@settings(max_examples=8, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(-5, 5), st.floats(0.2, 5))
def test_affine_equivariance(seed, a, s):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal(12)
    base = minkl_estimate(x, 0.5)
    moved = minkl_estimate(a + s * x, 0.5)
    tol = 1e-6 * (1 + np.ptp(a + s * x))
    assert abs(moved - (a + s * base)) <= 2 * tol


def test_gap_monotone():
    rng = np.random.default_rng(4)
    for _ in range(3):
        x = rng.laplace(size=12)
        cs = np.linspace(x.min(), x.max(), 21)
        gap = [dhat_L(x, c, 0.6) - dhat_R(x, c, 0.6) for c in cs]
        assert all(b <= a + 1e-9 for a, b in zip(gap, gap[1:]))


@pytest.mark.parametrize("y", [0.1, 0.5, 2.0])
def test_lower_anchor_nishiyama(y):
    _, F, _ = nishiyama_triple(y)
    u = F.points[1]
    x = np.array([-u, u] * 5)
    mid = 0.0
    anchor = 0.5 * math.log1p(2 * y)
    assert max(dhat_L(x, mid, y), dhat_R(x, mid, y)) >= anchor - 1e-9


def test_grid_refinement_agrees_with_dense_grid():
    rng = np.random.default_rng(5)
    for _ in range(5):
        x = rng.standard_t(3, size=10)
        c = float(np.median(x))
        assert dhat_L(x, c, 0.5) == pytest.approx(dhat_L(x, c, 0.5, mu_grid_size=4000),
                                                  abs=1e-8)


def test_baselines():
    assert baseline_estimate(EmpiricalMean(), [1, 2, 3]) == 2
    assert baseline_estimate(MedianOfMeans(3), [0, 0, 0, 3, 3, 3, 300, 300, 300]) == 3
    assert baseline_estimate(TrimmedMean(1 / 3), [-100, 0, 100]) == 0
    est = MedianOfMeans(3).fit(np.arange(11.0))
    assert est.block_means_.tolist() == [1.0, 4.0, 8.0]


def test_baseline_errors():
    with pytest.raises(DomainError):
        baseline_estimate(MedianOfMeans(5), [1.0, 2.0])
    with pytest.raises(DomainError):
        TrimmedMean(0.5).fit([1.0, 2.0])


def test_sklearn_api():
    est = MinKLMeanEstimator(delta=0.05)
    assert clone(est).get_params() == est.get_params()
    est.fit(np.array([0.0, 1.0, 2.0, 10.0]).reshape(-1, 1))
    assert est.y_ == pytest.approx(y_schedule(4, 0.05))
    lo, hi = est.bracket_
    assert lo <= est.location_ <= hi


def test_parse_estimator():
    assert isinstance(parse_estimator("minkl"), MinKLMeanEstimator)
    assert parse_estimator("minkl(y=0.5)").y == 0.5
    assert parse_estimator("mom(4)").n_blocks == 4
    assert parse_estimator("trimmed(0.2)").trim_fraction == 0.2
    for text in ("mom(0)", "trimmed(0.5)", "median", "minkl(z=1)"):
        with pytest.raises(ConfigError):
            parse_estimator(text)
