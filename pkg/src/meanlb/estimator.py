"""Min-KL mean estimator and baseline location estimators.

The min-KL estimate is the point where the two one-sided statistics

    d_L(c) = inf {KL(P_hat, F) : E_F[X] <= c - sqrt(2 y Var_F[X])}
    d_R(c) = inf {KL(P_hat, F) : E_F[X] >= c + sqrt(2 y Var_F[X])}

cross: ``sup {c : d_L(c) > d_R(c)}``. ``d_L`` is evaluated through the exact
decomposition of its constraint set by the value ``mu`` of the mean,
``d_L(c) = inf_{mu < c} K_eq(mu, (c - mu)^2 / (2 y))``, where ``K_eq(mu, V)``
is the projection on ``{E[X] = mu, Var[X] <= V}``. ``d_R`` is ``d_L`` of the
sample reflected about ``c``.

All estimators follow the scikit-learn estimator API: hyper-parameters are
constructor arguments, ``fit`` takes a sample and sets ``location_``.
"""

from __future__ import annotations

import math
import re

import numba
import numpy as np
from sklearn.base import BaseEstimator

from ._validation import check_count, check_probability, check_sample, empirical
from .exceptions import ConfigError, DomainError, NumericalError
from .kinf import _solve_equality

__all__ = [
    "MinKLMeanEstimator",
    "EmpiricalMean",
    "MedianOfMeans",
    "TrimmedMean",
    "y_schedule",
    "dhat_L",
    "dhat_R",
    "minkl_estimate",
    "baseline_estimate",
    "parse_estimator",
]

DEFAULT_MU_GRID = 129
GOLDEN = 0.5 * (math.sqrt(5.0) - 1.0)


def y_schedule(n, delta):
    """``(exp((2/n) log(2 e (n+1)^2 / delta)) - 1) / 2``."""
    n = check_count(n)
    delta = check_probability(delta)
    expo = (2.0 / n) * (math.log(2.0) + 1.0 + 2.0 * math.log1p(n) - math.log(delta))
    return 0.5 * math.expm1(expo)


# --- numba core ---------------------------------------------------------------

@numba.njit(cache=True)
def _keq(xs, w, mu, c, y, hint):
    """``K_eq(mu, (c - mu)^2 / (2y))`` and the solver state for warm starts."""
    V = (c - mu) * (c - mu) / (2.0 * y)
    if V <= 0.0:
        return math.inf, (-1, 0.0, 0.0)
    val, mode, p1, p2, res = _solve_equality(xs - mu, w, V, hint[0], hint[1], hint[2])
    return val, (mode, p1, p2)


@numba.njit(cache=True)
def _dhat_left(xs, w, c, y, ngrid):
    """``d_L(c)`` for sorted distinct ``xs`` with weights ``w``; returns (value, argmin mu)."""
    mean = 0.0
    for j in range(xs.size):
        mean += w[j] * xs[j]
    var = 0.0
    for j in range(xs.size):
        var += w[j] * (xs[j] - mean) ** 2
    if mean <= c - math.sqrt(2.0 * y * var):
        return 0.0, mean
    if xs.size == 1:
        # a point mass strictly above c: every mean below c costs the same
        return math.log1p(2.0 * y), c - 1.0
    span = xs[-1] - xs[0]
    lo = min(xs[0], c) - 2.0 * span
    h = (c - lo) / ngrid
    vals = np.empty(ngrid)
    hmode = np.empty(ngrid, dtype=np.int64)
    hp1 = np.empty(ngrid)
    hp2 = np.empty(ngrid)
    hint = (-1, 0.0, 0.0)
    for i in range(ngrid):
        vals[i], hint = _keq(xs, w, lo + i * h, c, y, hint)
        hmode[i], hp1[i], hp2[i] = hint
    # the objective need not be unimodal in mu: refine the best few local minima
    cand = np.empty(ngrid, dtype=np.int64)
    nc = 0
    for i in range(ngrid):
        left = vals[i - 1] if i > 0 else math.inf
        right = vals[i + 1] if i + 1 < ngrid else math.inf
        if vals[i] <= left and vals[i] <= right:
            cand[nc] = i
            nc += 1
    order = np.argsort(vals[cand[:nc]])
    best = math.inf
    mu_best = lo
    for r in range(min(nc, 3)):
        k = cand[order[r]]
        v, mu = _golden(xs, w, c, y, lo + max(k - 1, 0) * h, lo + (k + 1) * h,
                        1e-10 * (c - lo), (hmode[k], hp1[k], hp2[k]))
        if vals[k] < v:
            v, mu = vals[k], lo + k * h
        if v < best:
            best, mu_best = v, mu
    return best, mu_best


@numba.njit(cache=True)
def _golden(xs, w, c, y, a, b, tol, hint):
    x1 = b - GOLDEN * (b - a)
    x2 = a + GOLDEN * (b - a)
    f1, hint = _keq(xs, w, x1, c, y, hint)
    f2, hint = _keq(xs, w, x2, c, y, hint)
    while b - a > tol:
        if f1 <= f2:
            b, x2, f2 = x2, x1, f1
            x1 = b - GOLDEN * (b - a)
            f1, hint = _keq(xs, w, x1, c, y, hint)
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + GOLDEN * (b - a)
            f2, hint = _keq(xs, w, x2, c, y, hint)
    return (f1, x1) if f1 <= f2 else (f2, x2)


@numba.njit(cache=True)
def _dhat_right(xs, w, c, y, ngrid):
    xr = (2.0 * c - xs)[::-1].copy()
    wr = w[::-1].copy()
    val, mu = _dhat_left(xr, wr, c, y, ngrid)
    return val, 2.0 * c - mu


@numba.njit(cache=True)
def _crossing(xs, w, y, ngrid, tol):
    """Bisection for ``sup {c : d_L(c) > d_R(c)}``; returns (estimate, lo, hi, iters, ok)."""
    mean = 0.0
    for j in range(xs.size):
        mean += w[j] * xs[j]
    var = 0.0
    for j in range(xs.size):
        var += w[j] * (xs[j] - mean) ** 2
    half = math.sqrt(2.0 * y * var)
    lo = mean - half
    hi = mean + half
    # at lo the right statistic vanishes and at hi the left one does
    gl = _dhat_left(xs, w, lo, y, ngrid)[0] - _dhat_right(xs, w, lo, y, ngrid)[0]
    gh = _dhat_left(xs, w, hi, y, ngrid)[0] - _dhat_right(xs, w, hi, y, ngrid)[0]
    if not (gl >= 0.0 and gh <= 0.0):
        return mean, lo, hi, 0, False
    it = 0
    while hi - lo > tol and it < 200:
        mid = 0.5 * (lo + hi)
        g = _dhat_left(xs, w, mid, y, ngrid)[0] - _dhat_right(xs, w, mid, y, ngrid)[0]
        if g > 0.0:
            lo = mid
        else:
            hi = mid
        it += 1
    return 0.5 * (lo + hi), lo, hi, it, True


# --- functional API -----------------------------------------------------------

def _check_y(y):
    if not (y > 0 and math.isfinite(y)):
        raise DomainError(f"y must be positive and finite, got {y!r}")
    return float(y)


def dhat_L(sample, c, y, mu_grid_size=DEFAULT_MU_GRID):
    """Left statistic ``inf {KL(P_hat, F) : E_F[X] <= c - sqrt(2 y Var_F[X])}``."""
    pts, w = empirical(check_sample(sample))
    return float(_dhat_left(pts, w, float(c), _check_y(y), int(mu_grid_size))[0])


def dhat_R(sample, c, y, mu_grid_size=DEFAULT_MU_GRID):
    """Right statistic, ``dhat_L`` of the sample reflected about ``c``."""
    pts, w = empirical(check_sample(sample))
    return float(_dhat_right(pts, w, float(c), _check_y(y), int(mu_grid_size))[0])


def _default_tol(x):
    return 1e-6 * (1.0 + float(np.ptp(x)))


def minkl_estimate(sample, y, mu_grid_size=DEFAULT_MU_GRID, bisect_tol=None):
    """Crossing point of ``d_L - d_R``, found by bisection.

    The search starts from ``mean +- sqrt(2 y var)`` (empirical variance with
    divisor n). At the lower end the empirical distribution itself satisfies
    the right-hand constraint and at the upper end the left-hand one, so the
    bracket always contains the crossing.
    """
    x = check_sample(sample)
    y = _check_y(y)
    return _fit_minkl(x, y, mu_grid_size, bisect_tol)[0]


def _fit_minkl(x, y, mu_grid_size, bisect_tol):
    pts, w = empirical(x)
    if pts.size == 1:
        return float(pts[0]), (float(pts[0]), float(pts[0])), 0
    tol = _default_tol(x) if bisect_tol is None else float(bisect_tol)
    est, lo, hi, it, ok = _crossing(pts, w, y, int(mu_grid_size), tol)
    if not ok:
        raise NumericalError("gap function has no sign change on the bracket")
    return float(est), (float(lo), float(hi)), int(it)


def _as_1d(X):
    x = np.asarray(getattr(X, "values", X), dtype=float)
    if x.ndim == 2 and x.shape[1] == 1:
        x = x[:, 0]
    return check_sample(x, "X")


class _LocationEstimator(BaseEstimator):
    """Common plumbing: ``fit`` stores ``location_``; ``estimate`` returns it."""

    def estimate(self, X):
        return self.fit(X).location_

    def literal(self):
        raise NotImplementedError


class MinKLMeanEstimator(_LocationEstimator):
    """Min-KL mean estimator.

    Parameters
    ----------
    delta : float, default=0.1
        Confidence level used to set ``y`` when ``y`` is None.
    y : float or None, default=None
        Width parameter. None means ``y_schedule(n, delta)`` for the fitted n.
    mu_grid_size : int, default=129
        Number of candidate means in the coarse grid of each one-sided
        statistic (refined by golden section around the best one).
    bisect_tol : float or None, default=None
        Bracket width at which bisection stops; None means
        ``1e-6 * (1 + range(sample))``.

    Attributes
    ----------
    location_ : float
        The estimate.
    y_ : float
        Width parameter used.
    bracket_ : tuple of float
        Final bisection bracket.
    n_iter_ : int
        Bisection steps taken.
    """

    def __init__(self, delta=0.1, y=None, mu_grid_size=DEFAULT_MU_GRID, bisect_tol=None):
        self.delta = delta
        self.y = y
        self.mu_grid_size = mu_grid_size
        self.bisect_tol = bisect_tol

    def fit(self, X, y=None):
        x = _as_1d(X)
        if self.mu_grid_size < 2:
            raise DomainError("mu_grid_size must be at least 2")
        width = self.y if self.y is not None else y_schedule(x.size, self.delta)
        self.y_ = _check_y(width)
        self.location_, self.bracket_, self.n_iter_ = _fit_minkl(
            x, self.y_, self.mu_grid_size, self.bisect_tol)
        return self

    def literal(self):
        return "minkl" if self.y is None else f"minkl(y={float(self.y)!r})"


class EmpiricalMean(_LocationEstimator):
    """Sample average (exactly rounded sum)."""

    def fit(self, X, y=None):
        x = _as_1d(X)
        self.location_ = math.fsum(x) / x.size
        return self

    def literal(self):
        return "mean"


class MedianOfMeans(_LocationEstimator):
    """Median of the means of ``n_blocks`` contiguous blocks.

    Blocks have ``n // n_blocks`` points; the remainder joins the last block.
    """

    def __init__(self, n_blocks=3):
        self.n_blocks = n_blocks

    def fit(self, X, y=None):
        x = _as_1d(X)
        k = int(self.n_blocks)
        if k < 1 or k > x.size:
            raise DomainError(f"n_blocks={self.n_blocks} incompatible with n={x.size}")
        size = x.size // k
        means = [math.fsum(x[i * size:(i + 1) * size if i < k - 1 else x.size])
                 / (size if i < k - 1 else x.size - i * size) for i in range(k)]
        self.block_means_ = np.asarray(means)
        self.location_ = float(np.median(self.block_means_))
        return self

    def literal(self):
        return f"mom({int(self.n_blocks)})"


class TrimmedMean(_LocationEstimator):
    """Mean after removing ``floor(trim_fraction * n)`` points from each end."""

    def __init__(self, trim_fraction=0.1):
        self.trim_fraction = trim_fraction

    def fit(self, X, y=None):
        x = _as_1d(X)
        if not 0.0 <= self.trim_fraction < 0.5:
            raise DomainError("trim_fraction must lie in [0, 1/2)")
        g = math.floor(self.trim_fraction * x.size)
        kept = np.sort(x)[g:x.size - g]
        if kept.size == 0:
            raise DomainError("trimming removes every point")
        self.location_ = math.fsum(kept) / kept.size
        return self

    def literal(self):
        return f"trimmed({float(self.trim_fraction)!r})"


def baseline_estimate(spec, sample):
    """Fit a baseline estimator (or any location estimator) and return its estimate."""
    if isinstance(spec, str):
        spec = parse_estimator(spec)
    return spec.fit(check_sample(sample)).location_


_EST = re.compile(r"^\s*(?P<name>[a-z_]+)\s*(?:\(\s*(?P<arg>[^)]*)\))?\s*$")


def parse_estimator(text, line=None, column=None):
    """Build an estimator from ``minkl``, ``minkl(y=0.5)``, ``mean``, ``mom(k)`` or ``trimmed(f)``."""
    m = _EST.match(text)
    if not m:
        raise ConfigError(f"cannot parse estimator {text.strip()!r}", line, column)
    name, arg = m.group("name"), m.group("arg")
    try:
        if name == "minkl":
            if not arg:
                return MinKLMeanEstimator()
            key, _, val = arg.partition("=")
            if key.strip() != "y":
                raise ValueError("minkl accepts only y=<value>")
            return MinKLMeanEstimator(y=_check_y(float(val)))
        if name == "mean" and not arg:
            return EmpiricalMean()
        if name == "mom" and arg:
            k = int(arg)
            if k < 1:
                raise ValueError("block count must be at least 1")
            return MedianOfMeans(k)
        if name == "trimmed" and arg:
            f = float(arg)
            if not 0.0 <= f < 0.5:
                raise ValueError("trim fraction must lie in [0, 1/2)")
            return TrimmedMean(f)
    except (ValueError, DomainError) as exc:
        raise ConfigError(f"invalid estimator {text.strip()!r}: {exc}", line, column) from None
    raise ConfigError(f"unknown estimator {text.strip()!r}", line, column)
