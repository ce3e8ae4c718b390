"""Finite-support and parametric scenario distributions.

Everything here is immutable after construction. Discrete distributions keep
their atoms in canonical form (strictly increasing points, duplicates merged)
and carry log-weights next to the weights so that divergences between
distributions with extremely small masses stay finite and accurate.

Sampling is keyed by ``(master seed, trial index)``: the per-trial stream is
a numpy ``PCG64`` generator seeded with ``splitmix64(master + (trial + 1) *
GOLDEN_GAMMA)``. Any reimplementation that uses the same mixing and the same
generator reproduces the streams bit for bit.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field

import numpy as np

from .exceptions import ConfigError, DomainError

MASK64 = (1 << 64) - 1
GOLDEN_GAMMA = 0x9E3779B97F4A7C15

__all__ = [
    "DiscreteDist",
    "Gaussian",
    "Laplace",
    "HuberContamGaussian",
    "Sample",
    "Seed",
    "alpha_triple",
    "moments",
    "nishiyama_triple",
    "parse_distribution",
    "sample",
    "splitmix64",
]


def splitmix64(x):
    """64-bit avalanche finaliser of SplitMix64."""
    z = x & MASK64
    z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & MASK64
    z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & MASK64
    return z ^ (z >> 31)


@dataclass(frozen=True)
class Seed:
    """Master seed from which independent per-trial streams are derived."""

    master: int

    def __post_init__(self):
        if not 0 <= self.master <= MASK64:
            raise DomainError("seed must be an unsigned 64-bit integer")

    def substream(self, trial):
        return splitmix64(self.master + (trial + 1) * GOLDEN_GAMMA)

    def rng(self, trial):
        return np.random.Generator(np.random.PCG64(self.substream(trial)))


def _as_seed(seed):
    return seed if isinstance(seed, Seed) else Seed(int(seed))


def _freeze(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


class DiscreteDist:
    """Probability distribution on finitely many real points.

    Parameters
    ----------
    points : array-like
        Atom locations, in any order; repeated points are merged.
    weights : array-like
        Positive masses summing to one (within 1e-12). They are renormalised
        with an exactly rounded sum.

    Examples
    --------
    >>> d = DiscreteDist([1.0, 0.0, 1.0], [0.25, 0.5, 0.25])
    >>> d.points.tolist(), d.weights.tolist()
    ([0.0, 1.0], [0.5, 0.5])
    """

    __slots__ = ("_points", "_weights", "_log_weights")

    def __init__(self, points, weights):
        points = np.asarray(points, dtype=float).ravel()
        weights = np.asarray(weights, dtype=float).ravel()
        if points.shape != weights.shape or points.size == 0:
            raise DomainError("points and weights must be non-empty and of equal length")
        if not np.all(np.isfinite(points)):
            raise DomainError("atom locations must be finite")
        if np.any(~(weights > 0)):
            raise DomainError("weights must be strictly positive")
        total = math.fsum(weights)
        if abs(total - 1.0) > 1e-12:
            raise DomainError(f"weights sum to {total!r}, not 1")
        order = np.argsort(points, kind="stable")
        points, weights = points[order], weights[order]
        uniq, start = np.unique(points, return_index=True)
        if uniq.size != points.size:
            edges = list(start) + [points.size]
            weights = np.array([math.fsum(weights[a:b]) for a, b in zip(edges[:-1], edges[1:])])
        # dividing only when the sum is off by more than a few ulps keeps
        # construction idempotent, so literals round-trip exactly
        if abs(total - 1.0) > 8 * np.finfo(float).eps * weights.size:
            weights = weights / total
        self._points = _freeze(uniq)
        self._weights = _freeze(weights)
        self._log_weights = _freeze(np.log(weights))

    @classmethod
    def from_atoms(cls, atoms):
        pts, wts = zip(*atoms) if atoms else ((), ())
        return cls(pts, wts)

    @classmethod
    def from_log_weights(cls, points, log_weights):
        """Build from log-masses; needed when some masses underflow float64."""
        points = np.asarray(points, dtype=float).ravel()
        log_weights = np.asarray(log_weights, dtype=float).ravel()
        if points.shape != log_weights.shape or points.size == 0:
            raise DomainError("points and log-weights must be non-empty and of equal length")
        if not np.all(np.isfinite(log_weights)):
            raise DomainError("log-weights must be finite")
        top = log_weights.max()
        log_total = top + math.log(math.fsum(np.exp(log_weights - top)))
        if abs(log_total) > 1e-12:
            raise DomainError("masses do not sum to 1")
        obj = cls.__new__(cls)
        obj._set_canonical(points, log_weights)
        return obj

    @classmethod
    def point_mass(cls, x):
        return cls([x], [1.0])

    @classmethod
    def bernoulli(cls, a):
        """Bernoulli(a) on {0, 1}; degenerate endpoints give a point mass."""
        if not 0.0 <= a <= 1.0:
            raise DomainError("Bernoulli parameter must lie in [0, 1]")
        if a in (0.0, 1.0):
            return cls.point_mass(a)
        return cls([0.0, 1.0], [1.0 - a, a])

    def _set_canonical(self, points, log_weights):
        order = np.argsort(points, kind="stable")
        points, log_weights = points[order], log_weights[order]
        uniq, start = np.unique(points, return_index=True)
        if uniq.size != points.size:
            merged = np.empty(uniq.size)
            bounds = list(start) + [points.size]
            for i in range(uniq.size):
                block = log_weights[bounds[i]:bounds[i + 1]]
                top = block.max()
                merged[i] = top + math.log(math.fsum(np.exp(block - top)))
            log_weights = merged
        # renormalise so that exp(log_weights) sums to one to working precision
        top = log_weights.max()
        log_weights = log_weights - (top + math.log(math.fsum(np.exp(log_weights - top))))
        self._points = _freeze(uniq)
        self._log_weights = _freeze(log_weights)
        self._weights = _freeze(np.exp(log_weights))

    @property
    def points(self):
        return self._points

    @property
    def weights(self):
        return self._weights

    @property
    def log_weights(self):
        return self._log_weights

    @property
    def atoms(self):
        return list(zip(self._points.tolist(), self._weights.tolist()))

    def __len__(self):
        return self._points.size

    def __eq__(self, other):
        if not isinstance(other, DiscreteDist):
            return NotImplemented
        return self._key() == other._key()

    def _key(self):
        # weights decide equality; log-weights only where a mass underflows
        tiny = self._weights == 0.0
        return (self._points.tobytes(), self._weights.tobytes(), self._log_weights[tiny].tobytes())

    def __hash__(self):
        return hash(self._key())

    def __repr__(self):
        return f"DiscreteDist({self.atoms!r})"

    def expect(self, fn):
        """Expectation of ``fn`` (vectorised over the atoms), exactly rounded sum."""
        return math.fsum(self._weights * fn(self._points))

    def mean(self):
        return math.fsum(self._weights * self._points)

    def variance(self):
        m = self.mean()
        return math.fsum(self._weights * (self._points - m) ** 2)

    def central_moment(self, order):
        """``E|X - EX|^order``."""
        m = self.mean()
        return math.fsum(self._weights * np.abs(self._points - m) ** order)

    def prob(self, event):
        """Mass of a set of points (iterable) or of a boolean predicate on points."""
        if callable(event):
            mask = np.asarray(event(self._points), dtype=bool)
        else:
            mask = np.isin(self._points, np.asarray(list(event), dtype=float))
        return math.fsum(self._weights[mask])

    def _push(self, points):
        if np.all(self._weights > 0):
            return DiscreteDist(points, self._weights)
        obj = DiscreteDist.__new__(DiscreteDist)
        obj._set_canonical(points, self._log_weights.copy())
        return obj

    def shift(self, t):
        return self._push(self._points + t)

    def reflect(self, center=0.0):
        """Push-forward under ``x -> 2 * center - x``."""
        return self._push(2.0 * center - self._points)

    def sample(self, n, rng):
        cdf = np.cumsum(self._weights)
        idx = np.searchsorted(cdf, rng.random(n), side="right")
        return self._points[np.minimum(idx, self._points.size - 1)]

    def literal(self):
        body = ",".join(f"({x!r},{w!r})" for x, w in self.atoms)
        return f"discrete[{body}]"


@dataclass(frozen=True)
class Gaussian:
    mu: float = 0.0
    sigma: float = 1.0

    def __post_init__(self):
        if not self.sigma > 0:
            raise DomainError("Gaussian scale must be positive")

    def mean(self):
        return float(self.mu)

    def variance(self):
        return float(self.sigma) ** 2

    def pdf(self, x):
        z = (np.asarray(x, dtype=float) - self.mu) / self.sigma
        return np.exp(-0.5 * z * z) / (self.sigma * math.sqrt(2 * math.pi))

    def sample(self, n, rng):
        return rng.normal(self.mu, self.sigma, size=n)

    def literal(self):
        return f"gaussian({float(self.mu)!r},{float(self.sigma)!r})"


@dataclass(frozen=True)
class Laplace:
    """Laplace law with density ``exp(-|x - mu| / b) / (2 b)``."""

    mu: float = 0.0
    b: float = 1.0

    def __post_init__(self):
        if not self.b > 0:
            raise DomainError("Laplace scale must be positive")

    def mean(self):
        return float(self.mu)

    def variance(self):
        return 2.0 * float(self.b) ** 2

    def pdf(self, x):
        return np.exp(-np.abs(np.asarray(x, dtype=float) - self.mu) / self.b) / (2 * self.b)

    def sample(self, n, rng):
        return rng.laplace(self.mu, self.b, size=n)

    def literal(self):
        return f"laplace({float(self.mu)!r},{float(self.b)!r})"


@dataclass(frozen=True)
class HuberContamGaussian:
    """``(1 - eps) N(0, 1) + eps H`` with a finite-support contaminant ``H``."""

    eps: float
    contaminant: DiscreteDist = field(compare=True)

    def __post_init__(self):
        if not 0 < self.eps < 0.5:
            raise DomainError("contamination level must lie in (0, 1/2)")
        if not isinstance(self.contaminant, DiscreteDist):
            raise DomainError("contaminant must be a finite-support DiscreteDist "
                              "(other contaminants have no computable moments here)")

    def mean(self):
        return self.eps * self.contaminant.mean()

    def variance(self):
        h = self.contaminant
        second = (1 - self.eps) * 1.0 + self.eps * h.expect(np.square)
        return second - self.mean() ** 2

    def sample(self, n, rng):
        corrupt = rng.random(n) < self.eps
        clean = rng.normal(0.0, 1.0, size=n)
        dirty = self.contaminant.sample(n, rng)
        return np.where(corrupt, dirty, clean)

    def literal(self):
        return f"huber({float(self.eps)!r},{self.contaminant.literal()})"


ScenarioDist = (Gaussian, Laplace, DiscreteDist, HuberContamGaussian)


def moments(dist):
    """Exact ``(mean, variance)`` of a scenario distribution."""
    if not isinstance(dist, ScenarioDist):
        raise DomainError(f"unsupported distribution {dist!r}")
    return dist.mean(), dist.variance()


@dataclass(frozen=True)
class Sample:
    """Observations together with where they came from."""

    values: np.ndarray
    generator: str = ""
    seed: int | None = None
    trial: int | None = None

    def __len__(self):
        return len(self.values)

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.values, dtype=dtype)


def sample(dist, n, seed, trial=0):
    """Draw ``n`` i.i.d. values from ``dist`` on the substream of ``trial``."""
    if n < 1:
        raise DomainError("sample size must be at least 1")
    seed = _as_seed(seed)
    values = np.asarray(dist.sample(int(n), seed.rng(trial)), dtype=float)
    values.setflags(write=False)
    return Sample(values, dist.literal(), seed.master, trial)


def nishiyama_triple(y):
    """Two-point laws on ``+-sqrt(1 + 2y)`` extremal for the mean/variance sets.

    Returns ``(P, F, G)``: ``P`` is uniform on the two atoms, ``F`` has mean
    ``-sqrt(2y)`` and ``G = reflect(F)`` has mean ``+sqrt(2y)``; both have
    unit variance.
    """
    if not y > 0:
        raise DomainError("y must be positive")
    u = math.sqrt(1.0 + 2.0 * y)
    r = math.sqrt(2.0 * y / (1.0 + 2.0 * y))
    # F(u) = (1 - r) / 2 written without cancellation
    log_fu = -math.log(2.0) - math.log1p(2.0 * y) - math.log1p(r)
    log_gu = math.log1p(-math.exp(log_fu))
    pts = [-u, u]
    P = DiscreteDist.from_log_weights(pts, [-math.log(2.0), -math.log(2.0)])
    F = DiscreteDist.from_log_weights(pts, [log_gu, log_fu])
    G = DiscreteDist.from_log_weights(pts, [log_fu, log_gu])
    return P, F, G


def alpha_triple(p, c):
    """``P = delta_0``, ``G = (1-p) delta_0 + p delta_c`` and ``F`` its mirror."""
    if not 0 < p < 1:
        raise DomainError("p must lie in (0, 1)")
    if not c > 0:
        raise DomainError("c must be positive")
    P = DiscreteDist.point_mass(0.0)
    G = DiscreteDist.from_log_weights([0.0, c], [math.log1p(-p), math.log(p)])
    F = G.reflect(0.0)
    return P, F, G


# --- literal parsing --------------------------------------------------------

_TOKEN = re.compile(r"\s*(?:(?P<num>[-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?|[-+]?inf)"
                    r"|(?P<name>[A-Za-z_][A-Za-z_0-9]*)|(?P<punct>[()\[\],]))")


class _Parser:
    def __init__(self, text, line, col0):
        self.text, self.line, self.col0 = text, line, col0
        self.toks = []
        pos = 0
        while pos < len(text):
            if text[pos:].strip() == "":
                break
            m = _TOKEN.match(text, pos)
            if not m or m.end() == pos:
                self.fail("unexpected character", pos + len(text[pos:]) - len(text[pos:].lstrip()))
            kind = m.lastgroup
            start = m.start(kind)
            self.toks.append((kind, m.group(kind), start))
            pos = m.end()
        self.i = 0

    def fail(self, msg, pos=None):
        col = None if pos is None else self.col0 + pos + 1
        raise ConfigError(msg, self.line, col)

    def peek(self):
        return self.toks[self.i] if self.i < len(self.toks) else (None, None, len(self.text))

    def take(self, kind=None, value=None):
        tok = self.peek()
        if tok[0] is None or (kind and tok[0] != kind) or (value and tok[1] != value):
            want = value or kind
            self.fail(f"expected {want!r}", tok[2])
        self.i += 1
        return tok

    def number(self):
        return float(self.take("num")[1])

    def args(self, count_min, count_max):
        self.take("punct", "(")
        vals = []
        while True:
            kind, val, pos = self.peek()
            if kind == "num":
                vals.append(self.number())
            elif kind == "name" and val in ("P", "F", "G"):
                vals.append(self.take()[1])
            else:
                vals.append(self.dist())
            if self.peek()[1] == ",":
                self.take()
                continue
            self.take("punct", ")")
            break
        if not count_min <= len(vals) <= count_max:
            self.fail(f"expected {count_min}..{count_max} arguments, got {len(vals)}", pos)
        return vals

    def atoms(self):
        self.take("punct", "[")
        out = []
        while self.peek()[1] != "]":
            self.take("punct", "(")
            x = self.number()
            self.take("punct", ",")
            w = self.number()
            self.take("punct", ")")
            out.append((x, w))
            if self.peek()[1] == ",":
                self.take()
        self.take("punct", "]")
        return out

    def dist(self):
        kind, name, pos = self.take("name")
        try:
            if name == "discrete":
                return DiscreteDist.from_atoms(self.atoms())
            if name == "gaussian":
                mu, sigma = self.args(2, 2)
                return Gaussian(mu, sigma)
            if name == "laplace":
                mu, b = self.args(2, 2)
                return Laplace(mu, b)
            if name == "nishiyama":
                a = self.args(1, 2)
                member = a[1] if len(a) > 1 else "F"
                return dict(zip("PFG", nishiyama_triple(a[0])))[member]
            if name == "alpha_triple":
                a = self.args(2, 3)
                member = a[2] if len(a) > 2 else "G"
                return dict(zip("PFG", alpha_triple(a[0], a[1])))[member]
            if name == "huber":
                eps, h = self.args(2, 2)
                return HuberContamGaussian(eps, h)
        except (DomainError, TypeError) as exc:
            self.fail(f"invalid {name} literal: {exc}", pos)
        self.fail(f"unknown distribution {name!r}", pos)

    def parse(self):
        d = self.dist()
        if self.i != len(self.toks):
            self.fail("trailing input", self.toks[self.i][2])
        return d


def parse_distribution(text, line=None, column_offset=0):
    """Parse a literal such as ``gaussian(0,1)`` or ``huber(0.1, discrete[(5,1)])``.

    ``nishiyama(y)`` denotes the negative-mean member ``F`` of the triple and
    ``alpha_triple(p, c)`` the positive-mean member ``G``; an extra trailing
    argument ``P``, ``F`` or ``G`` selects another member.
    """
    return _Parser(text, line, column_offset).parse()
