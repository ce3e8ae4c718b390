import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from meanlb.distributions import DiscreteDist, nishiyama_triple
from meanlb.divergences import (
    DivergenceValue,
    chernoff_discrete,
    hellinger_discrete,
    kl_discrete,
    kl_gaussian,
    kl_laplace_shift,
    renyi_discrete,
    renyi_half_gaussian,
    verify_change_of_measure,
    verify_data_processing,
)
from meanlb.exceptions import DomainError, NumericalError

B = DiscreteDist.bernoulli


def test_bernoulli_values():
    mp.mp.dps = 40
    h, q = mp.mpf(1) / 2, mp.mpf(1) / 4
    kl = h * mp.log(h / q) + h * mp.log(h / (1 - q))
    bc = mp.sqrt(h * q) + mp.sqrt(h * (1 - q))
    assert kl_discrete(B(0.5), B(0.25)).value == pytest.approx(float(kl), abs=1e-15)
    assert renyi_discrete(0.5, B(0.5), B(0.25)).value == pytest.approx(float(-2 * mp.log(bc)),
                                                                       abs=1e-15)
    assert hellinger_discrete(B(0.5), B(0.25), squared=True).value == pytest.approx(
        float(1 - bc), abs=1e-15)
    # frozen
    assert kl_discrete(B(0.5), B(0.25)).value == pytest.approx(0.1438410362258904, abs=1e-15)
    assert renyi_discrete(0.5, B(0.5), B(0.25)).value == pytest.approx(0.0693364641950739,
                                                                       abs=1e-15)


def test_kl_mpmath():
    mp.mp.dps = 40
    P = DiscreteDist([0, 1, 3], [0.2, 0.3, 0.5])
    Q = DiscreteDist([0, 1, 3], [0.6, 0.3, 0.1])
    ref = sum(mp.mpf(p) * mp.log(mp.mpf(p) / mp.mpf(q))
              for p, q in [("0.2", "0.6"), ("0.3", "0.3"), ("0.5", "0.1")])
    assert kl_discrete(P, Q).value == pytest.approx(float(ref), rel=1e-14)


def test_kl_infinite_and_zero():
    assert math.isinf(kl_discrete(B(0.5), DiscreteDist.point_mass(0.0)).value)
    assert kl_discrete(B(0.3), B(0.3)).value == 0.0


def test_negative_value_rejected():
    with pytest.raises(NumericalError):
        DivergenceValue(-1e-3)


def test_renyi_alpha_domain():
    with pytest.raises(DomainError):
        renyi_discrete(1.0, B(0.5), B(0.5))


def _random_pair(rng, k):
    pts = rng.choice(np.arange(-20, 20), size=k, replace=False).astype(float)
    p = rng.dirichlet(np.ones(k))
    q = rng.dirichlet(np.ones(k))
    return DiscreteDist(pts, p), DiscreteDist(pts, q)


def test_hellinger_renyi_identity():
    rng = np.random.default_rng(11)
    for _ in range(200):
        P, Q = _random_pair(rng, int(rng.integers(1, 9)))
        d = renyi_discrete(0.5, P, Q).value
        h2 = hellinger_discrete(P, Q, squared=True).value
        assert abs(0.5 * d + math.log1p(-h2)) <= 1e-12


def test_chernoff_symmetric_pairs():
    rng = np.random.default_rng(12)
    for _ in range(100):
        half = rng.choice(np.arange(1, 20), size=4, replace=False).astype(float)
        pts = np.concatenate([-half, half])
        F = DiscreteDist(pts, rng.dirichlet(np.ones(8)))
        G = F.reflect(0.0)
        dc, star = chernoff_discrete(F, G)
        assert abs(renyi_discrete(0.5, F, G).value - 2 * dc.value) <= 2 * dc.residual + 1e-12


def test_chernoff_general_pair_is_minimax():
    rng = np.random.default_rng(13)
    for _ in range(30):
        F, G = _random_pair(rng, 5)
        dc, star = chernoff_discrete(F, G)
        a, b = kl_discrete(star, F).value, kl_discrete(star, G).value
        assert max(a, b) == pytest.approx(dc.value, abs=1e-8)
        # no point on a fine geometric path does better
        for t in np.linspace(0, 1, 41):
            lw = t * F.log_weights + (1 - t) * G.log_weights
            P = DiscreteDist(F.points, np.exp(lw - np.log(np.exp(lw).sum())))
            assert max(kl_discrete(P, F).value, kl_discrete(P, G).value) >= dc.value - 1e-9


def test_chernoff_disjoint():
    dc, star = chernoff_discrete(DiscreteDist.point_mass(0.0), DiscreteDist.point_mass(1.0))
    assert math.isinf(dc.value) and star is None


@pytest.mark.parametrize("y", [1e-3, 0.1, 0.5, 2.0, 10.0])
def test_nishiyama_divergences(y):
    P, F, G = nishiyama_triple(y)
    assert renyi_discrete(0.5, F, G).value == pytest.approx(math.log1p(2 * y), abs=1e-10)
    assert kl_discrete(P, F).value == pytest.approx(0.5 * math.log1p(2 * y), abs=1e-10)


@pytest.mark.parametrize("y", [0.1, 0.5, 2.0])
def test_mean_variance_hellinger(y):
    _, F, G = nishiyama_triple(y)
    m2 = 2 * y
    expected = 1 - math.sqrt(1 - m2 / (m2 + 1))
    assert hellinger_discrete(F, G, squared=True).value == pytest.approx(expected, abs=1e-12)


@pytest.mark.parametrize("a", [0.01, 0.1, 0.25, 0.4])
def test_bernoulli_tightness(a):
    Ba, Bb = B(a), B(1 - a)
    target = math.log(1 / (4 * a)) + math.log(1 / (1 - a))
    d = renyi_discrete(0.5, Ba, Bb).value
    dc, _ = chernoff_discrete(Ba, Bb)
    assert d == pytest.approx(target, abs=1e-9)
    assert 2 * dc.value == pytest.approx(target, abs=1e-9)


def test_gaussian_closed_forms_against_quadrature():
    mp.mp.dps = 30
    m1, s1, m2, s2 = 0.3, 1.2, -0.5, 0.7

    def pdf(x, m, s):
        return mp.exp(-(x - m) ** 2 / (2 * s * s)) / (s * mp.sqrt(2 * mp.pi))

    bc = mp.quad(lambda x: mp.sqrt(pdf(x, m1, s1) * pdf(x, m2, s2)), [-mp.inf, 0, mp.inf])
    kl = mp.quad(lambda x: pdf(x, m1, s1) * mp.log(pdf(x, m1, s1) / pdf(x, m2, s2)),
                 [-mp.inf, 0, mp.inf])
    assert float(renyi_half_gaussian(m1, s1, m2, s2)) == pytest.approx(float(-2 * mp.log(bc)),
                                                                      rel=1e-12)
    assert float(kl_gaussian(m1, s1, m2, s2)) == pytest.approx(float(kl), rel=1e-12)


def test_laplace_kl_against_quadrature():
    mp.mp.dps = 30
    d, b = 0.7, 1.3

    def pdf(x, m):
        return mp.exp(-abs(x - m) / b) / (2 * b)

    ref = mp.quad(lambda x: pdf(x, 0) * mp.log(pdf(x, 0) / pdf(x, d)), [-mp.inf, 0, d, mp.inf])
    assert float(kl_laplace_shift(d, b)) == pytest.approx(float(ref), rel=1e-12)
    # tiny shifts stay accurate
    assert float(kl_laplace_shift(1e-9, 1.0)) == pytest.approx(0.5e-18, rel=1e-6)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_data_processing_random(seed):
    rng = np.random.default_rng(seed)
    P, Q = _random_pair(rng, 6)
    event = set(rng.choice(P.points, size=3, replace=False).tolist())
    assert verify_data_processing(P, Q, event).holds


def test_change_of_measure_nishiyama():
    P, F, G = nishiyama_triple(0.5)
    rep = verify_change_of_measure(P, F, G, 8, lambda xs: xs.mean(axis=1) >= 0, beta=0.5)
    assert rep.holds
    assert rep.chain_rule_error <= 1e-12


def test_change_of_measure_too_large():
    P, F, G = nishiyama_triple(0.5)
    with pytest.raises(DomainError):
        verify_change_of_measure(P, F, G, 25, lambda xs: xs[:, 0] > 0, beta=1.0)
