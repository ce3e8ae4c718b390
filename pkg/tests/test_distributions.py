import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from meanlb.distributions import (
    DiscreteDist,
    Gaussian,
    HuberContamGaussian,
    Laplace,
    Seed,
    alpha_triple,
    moments,
    nishiyama_triple,
    parse_distribution,
    sample,
    splitmix64,
)
from meanlb.exceptions import ConfigError, DomainError

Y_GRID = [1e-3, 1e-2, 0.1, 0.5, 1.0, 2.0, 10.0]


def test_nishiyama_half():
    P, F, G = nishiyama_triple(0.5)
    assert F.points[1] == pytest.approx(math.sqrt(2), abs=1e-12)
    assert F.prob(lambda x: x > 0) == pytest.approx(0.146447, abs=1e-6)
    assert G.prob(lambda x: x > 0) == pytest.approx(0.853553, abs=1e-6)
    assert P.prob(lambda x: x > 0) == 0.5


def test_nishiyama_against_mpmath():
    mp.mp.dps = 40
    y = mp.mpf("0.5")
    u = mp.sqrt(1 + 2 * y)
    fu = mp.mpf(1) / 2 - mp.sqrt(2 * y / (1 + 2 * y)) / 2
    _, F, _ = nishiyama_triple(0.5)
    assert F.points[1] == pytest.approx(float(u), rel=1e-15)
    assert F.weights[1] == pytest.approx(float(fu), rel=1e-14)


@pytest.mark.parametrize("y", Y_GRID)
def test_nishiyama_moments(y):
    _, F, G = nishiyama_triple(y)
    assert F.mean() == pytest.approx(-math.sqrt(2 * y), abs=1e-10)
    assert G.mean() == pytest.approx(math.sqrt(2 * y), abs=1e-10)
    assert F.variance() == pytest.approx(1.0, abs=1e-10)
    assert G.variance() == pytest.approx(1.0, abs=1e-10)


def test_nishiyama_degenerate_limit():
    _, F, _ = nishiyama_triple(1e-12)
    assert F.weights[1] == pytest.approx(0.5, abs=1e-6)


def test_nishiyama_domain():
    with pytest.raises(DomainError):
        nishiyama_triple(0.0)


def test_alpha_triple_mean():
    _, F, G = alpha_triple(0.5, 2.0)
    assert G.mean() == 1.0
    assert F.mean() == -1.0


def test_alpha_triple_moment():
    # direct two-atom summation; the value frozen here is 0.1138420..
    _, _, G = alpha_triple(0.1, 1.0)
    m = G.central_moment(1.5)
    closed = 0.1 * 0.9 * (0.1 ** 0.5 + 0.9 ** 0.5)
    assert m == pytest.approx(closed, rel=1e-14)
    assert m == pytest.approx(0.1138420, abs=1e-7)


def test_alpha_triple_small_p():
    _, _, G = alpha_triple(1e-9, 1.0)
    assert G.mean() == pytest.approx(0.0, abs=1e-8)


@pytest.mark.parametrize("p,c", [(0.0, 1.0), (1.0, 1.0), (0.5, 0.0)])
def test_alpha_triple_domain(p, c):
    with pytest.raises(DomainError):
        alpha_triple(p, c)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.tuples(st.integers(-5, 5), st.floats(0.01, 1.0)), min_size=1, max_size=8),
       st.randoms(use_true_random=False))
def test_canonical_form(atoms, rnd):
    total = math.fsum(w for _, w in atoms)
    atoms = [(x, w / total) for x, w in atoms]
    shuffled = list(atoms)
    rnd.shuffle(shuffled)
    a = DiscreteDist.from_atoms(atoms)
    x0, w0 = shuffled[0]
    b = DiscreteDist.from_atoms([(x0, w0 / 2), (x0, w0 / 2)] + shuffled[1:])
    assert a == b
    assert np.all(np.diff(a.points) > 0)
    assert math.fsum(a.weights) == pytest.approx(1.0, abs=1e-12)


def test_duplicates_merge():
    d = DiscreteDist([1.0, 0.0, 1.0], [0.25, 0.5, 0.25])
    assert list(d.atoms) == [(0.0, 0.5), (1.0, 0.5)]


def test_invalid_weights():
    with pytest.raises(DomainError):
        DiscreteDist([0.0, 1.0], [0.5, -0.5])


def test_point_mass_sample():
    assert list(sample(DiscreteDist.point_mass(0.0), 5, 1).values) == [0.0] * 5


def test_sample_determinism():
    a = sample(Gaussian(0, 1), 50, Seed(9), trial=4).values
    b = sample(Gaussian(0, 1), 50, 9, trial=4).values
    assert a.tobytes() == b.tobytes()
    c = sample(Gaussian(0, 1), 50, 9, trial=5).values
    assert a.tobytes() != c.tobytes()


def test_sample_order_independent():
    seq = [sample(Laplace(0, 1), 10, 3, t).values.tobytes() for t in range(6)]
    rev = [sample(Laplace(0, 1), 10, 3, t).values.tobytes() for t in reversed(range(6))]
    assert seq == rev[::-1]


def test_gaussian_clt():
    n = 100_000
    for s in range(20):
        x = sample(Gaussian(0, 1), n, s).values
        assert abs(x.mean()) <= 4 / math.sqrt(n)


def test_splitmix_reference():
    # first output of the reference splitmix64 generator seeded with 0
    assert splitmix64(0x9E3779B97F4A7C15) == 0xE220A8397B1DCDAF


def test_moments():
    assert moments(Laplace(3, 2)) == (3, 8)
    _, F, _ = nishiyama_triple(0.5)
    m, v = moments(F)
    assert (m, v) == pytest.approx((-1.0, 1.0), abs=1e-12)
    assert moments(DiscreteDist.bernoulli(0.25)) == pytest.approx((0.25, 0.1875), abs=1e-15)


def test_huber_moments_and_mass():
    h = HuberContamGaussian(0.1, DiscreteDist([10.0], [1.0]))
    m, v = moments(h)
    assert m == pytest.approx(1.0)
    assert v == pytest.approx(0.9 + 0.1 * 100 - 1.0)
    x = sample(h, 200_000, 2).values
    assert abs(x.mean() - m) < 5 * math.sqrt(v / x.size)


@pytest.mark.parametrize("text", [
    "gaussian(0, 1)", "laplace(3,2)", "discrete[(0,0.25),(1,0.75)]", "nishiyama(0.5)",
    "nishiyama(0.5, G)", "alpha_triple(0.1, 1)", "huber(0.1, discrete[(5,1)])",
])
def test_literal_round_trip(text):
    d = parse_distribution(text)
    assert parse_distribution(d.literal()) == d


def test_literal_members():
    P, F, G = nishiyama_triple(0.5)
    assert parse_distribution("nishiyama(0.5)") == F
    assert parse_distribution("nishiyama(0.5,P)") == P
    assert parse_distribution("alpha_triple(0.1,1)") == alpha_triple(0.1, 1)[2]


def test_literal_error_column():
    with pytest.raises(ConfigError) as err:
        parse_distribution("gaussian(0, 1", line=3)
    assert err.value.line == 3 and err.value.column is not None
    with pytest.raises(ConfigError):
        parse_distribution("pareto(1)")
