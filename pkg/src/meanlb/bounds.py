"""Lower bounds on the deviation width of any mean estimator.

Each calculator returns a :class:`BoundResult` whose ``kind`` says what the
value measures:

``"y"``
    variance-type bound; the width is ``sqrt(2 sigma^2 y)``.
``"epsilon"``
    a width in the units of the data.
``"eta"``
    a per-root-n width: the width is ``eta / sqrt(n)``.
``"delta_floor"``
    the smallest admissible error probability.

When ``delta`` is beyond the positivity threshold of a formula the value is
0 and ``positive`` is False. Every calculator accepts ``log_delta`` instead
of ``delta`` so that error probabilities below the float range (such as
``exp(-n t)`` for large ``n``) can be used.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import bisect

from ._validation import check_count
from .exceptions import DomainError, NumericalError

__all__ = [
    "BoundQuery",
    "BoundResult",
    "BOUND_CLASSES",
    "compute_bound",
    "finite_variance_bound_1",
    "finite_variance_bound_2",
    "gaussian_bound",
    "laplace_floor",
    "laplace_feasible",
    "laplace_inequality_holds",
    "laplace_scalar_root",
    "moment_alpha_bound",
    "log_lipschitz_bound",
    "fisher_bound",
    "bounded_support_bound",
    "semi_bounded_bound",
    "SEMI_BOUNDED_CONSTANT",
]

SEMI_BOUNDED_CONSTANT = 9.0 - 24.0 / math.pi


@dataclass(frozen=True)
class BoundResult:
    value: float
    kind: str
    residual: float = 0.0
    positive: bool = True
    feasible: bool = True
    bound_class: str = ""

    def __float__(self):
        return float(self.value)


def _log_delta(delta, log_delta):
    """Validated ``log(delta)`` from either argument."""
    if (delta is None) == (log_delta is None):
        raise DomainError("give exactly one of delta and log_delta")
    if log_delta is None:
        if not 0.0 < delta < 1.0:
            raise DomainError(f"delta must lie in (0, 1), got {delta!r}")
        return math.log(delta)
    if not (log_delta < 0.0 and math.isfinite(log_delta)):
        raise DomainError(f"log_delta must be negative and finite, got {log_delta!r}")
    return float(log_delta)


def _log_inv_4delta(delta, log_delta):
    return -math.log(4.0) - _log_delta(delta, log_delta)


def _width_factor(delta, log_delta):
    """``sqrt(1 + 2 log(1/(4 delta))) - 1`` (0 above delta = 1/4)."""
    ell = _log_inv_4delta(delta, log_delta)
    if ell <= 0.0:
        return 0.0, False
    # sqrt(1 + 2l) - 1 without cancellation for small l
    return 2.0 * ell / (math.sqrt(1.0 + 2.0 * ell) + 1.0), True


def finite_variance_bound_1(n, delta=None, *, log_delta=None):
    """Smallest ``y`` with ``log(1/(4 delta)) / n <= log(1 + 2 y)``."""
    n = check_count(n)
    ell = _log_inv_4delta(delta, log_delta)
    if ell <= 0.0:
        return BoundResult(0.0, "y", positive=False, bound_class="finite_variance_1")
    return BoundResult(0.5 * math.expm1(ell / n), "y", bound_class="finite_variance_1")


def _fv2_lhs(y, n):
    return 0.5 * math.log1p(2.0 * y) + (2.0 / math.sqrt(n)) * math.asinh(math.sqrt(2.0 * y))


def finite_variance_bound_2(n, delta=None, *, log_delta=None):
    """Smallest ``y`` with
    ``log(1/(4 delta)) / n <= log(1 + 2y) / 2 + (2 / sqrt(n)) log(sqrt(1 + 2y) + sqrt(2y))``.

    The right side is strictly increasing in ``y``; the root is bracketed by
    doubling and located by bisection to full double precision.
    ``log(sqrt(1 + 2y) + sqrt(2y))`` is evaluated as ``asinh(sqrt(2y))``.
    """
    n = check_count(n)
    ell = _log_inv_4delta(delta, log_delta)
    if ell <= 0.0:
        return BoundResult(0.0, "y", positive=False, bound_class="finite_variance_2")
    target = ell / n

    def f(y):
        return _fv2_lhs(y, n) - target

    hi = 1.0
    while f(hi) < 0.0:
        hi *= 2.0
        if hi > 1e300:
            raise NumericalError("could not bracket the finite-variance root")
    y = bisect(f, 0.0, hi, xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=5000)
    return BoundResult(y, "y", residual=abs(f(y)), bound_class="finite_variance_2")


def gaussian_bound(n, delta=None, *, log_delta=None):
    """``y >= log(1/(4 delta)) / (2n)`` for Gaussian families."""
    n = check_count(n)
    ell = _log_inv_4delta(delta, log_delta)
    if ell <= 0.0:
        return BoundResult(0.0, "y", positive=False, bound_class="gaussian")
    return BoundResult(ell / (2.0 * n), "y", bound_class="gaussian")


def laplace_floor(n):
    """Smallest ``delta`` compatible with an optimal-constant sub-Gaussian estimator
    on Laplace families: ``exp(-4n) / 4``."""
    n = check_count(n)
    return 0.25 * math.exp(-4.0 * n)


def laplace_feasible(n, delta=None, *, log_delta=None):
    """True when ``delta`` is at or above :func:`laplace_floor`."""
    n = check_count(n)
    return _log_delta(delta, log_delta) >= -4.0 * n - math.log(4.0)


def _laplace_gap(x):
    return x * x / 4.0 - (math.expm1(-2.0 * x) + 2.0 * x)


def laplace_inequality_holds(x):
    """``x^2 / 4 <= exp(-2x) + 2x - 1`` for ``x >= 0``."""
    if x < 0:
        raise DomainError("x must be nonnegative")
    return _laplace_gap(x) <= 0.0


def laplace_scalar_root():
    """Positive root of ``x^2/4 = exp(-2x) + 2x - 1`` (the inequality holds below it)."""
    return bisect(_laplace_gap, math.log(8.0) / 2.0, 8.0, xtol=1e-15, rtol=4 * np.finfo(float).eps)


def moment_alpha_bound(n, delta=None, alpha=0.5, *, log_delta=None):
    """``epsilon >= 2^(-1/(1+a)) (log(1/(2 delta)) / n)^(a/(1+a))``."""
    n = check_count(n)
    if not 0.0 < alpha < 1.0:
        raise DomainError("alpha must lie in (0, 1)")
    ell = -math.log(2.0) - _log_delta(delta, log_delta)
    if ell <= 0.0:
        return BoundResult(0.0, "epsilon", positive=False, bound_class="moment_alpha")
    val = 2.0 ** (-1.0 / (1.0 + alpha)) * (ell / n) ** (alpha / (1.0 + alpha))
    return BoundResult(val, "epsilon", bound_class="moment_alpha")


def log_lipschitz_bound(n, delta=None, L=1.0, *, log_delta=None):
    """``epsilon >= log(1 + sqrt(4 (1 - exp(-log(1/(4 delta)) / (2n))))) / L``."""
    n = check_count(n)
    if not L > 0:
        raise DomainError("L must be positive")
    ell = _log_inv_4delta(delta, log_delta)
    if ell <= 0.0:
        return BoundResult(0.0, "epsilon", positive=False, bound_class="log_lipschitz")
    val = math.log1p(math.sqrt(-4.0 * math.expm1(-ell / (2.0 * n)))) / L
    return BoundResult(val, "epsilon", bound_class="log_lipschitz")


def fisher_bound(delta=None, info=1.0, *, log_delta=None):
    """``eta >= (sqrt(1 + 2 log(1/(4 delta))) - 1) / sqrt(I)``."""
    if not info > 0:
        raise DomainError("Fisher information must be positive")
    fac, pos = _width_factor(delta, log_delta)
    return BoundResult(fac / math.sqrt(info), "eta", positive=pos, bound_class="fisher")


def bounded_support_bound(delta=None, a=0.0, b=1.0, *, log_delta=None):
    """``eta >= ((b - a) / pi) (sqrt(1 + 2 log(1/(4 delta))) - 1)``."""
    if not a < b:
        raise DomainError("need a < b")
    fac, pos = _width_factor(delta, log_delta)
    return BoundResult((b - a) / math.pi * fac, "eta", positive=pos, bound_class="bounded_support")


def semi_bounded_bound(delta=None, variance=1.0, *, log_delta=None):
    """``eta >= sqrt(variance / (9 - 24/pi)) (sqrt(1 + 2 log(1/(4 delta))) - 1)``."""
    if not variance > 0:
        raise DomainError("variance must be positive")
    fac, pos = _width_factor(delta, log_delta)
    val = math.sqrt(variance / SEMI_BOUNDED_CONSTANT) * fac
    return BoundResult(val, "eta", positive=pos, bound_class="semi_bounded")


# --- query dispatch -----------------------------------------------------------

BOUND_CLASSES = {
    "gaussian": (),
    "laplace": (),
    "finite_variance_1": (),
    "finite_variance_2": (),
    "moment_alpha": ("alpha",),
    "log_lipschitz": ("L",),
    "fisher": ("I",),
    "bounded_support": ("a", "b"),
    "semi_bounded": ("variance",),
}


@dataclass(frozen=True)
class BoundQuery:
    """A bound class with its parameters, sample size and error probability."""

    bound_class: str
    n: int
    delta: float
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.bound_class not in BOUND_CLASSES:
            raise DomainError(f"unknown bound class {self.bound_class!r}")
        missing = set(BOUND_CLASSES[self.bound_class]) - set(self.params)
        if missing:
            raise DomainError(f"{self.bound_class} needs parameter(s) {sorted(missing)}")


def compute_bound(query):
    """Evaluate a :class:`BoundQuery`."""
    c, n, d, p = query.bound_class, query.n, query.delta, query.params
    if c == "gaussian":
        return gaussian_bound(n, d)
    if c == "laplace":
        floor = laplace_floor(n)
        return BoundResult(floor, "delta_floor", feasible=d >= floor, bound_class="laplace")
    if c == "finite_variance_1":
        return finite_variance_bound_1(n, d)
    if c == "finite_variance_2":
        return finite_variance_bound_2(n, d)
    if c == "moment_alpha":
        return moment_alpha_bound(n, d, float(p["alpha"]))
    if c == "log_lipschitz":
        return log_lipschitz_bound(n, d, float(p["L"]))
    if c == "fisher":
        return fisher_bound(d, float(p["I"]))
    if c == "bounded_support":
        return bounded_support_bound(d, float(p["a"]), float(p["b"]))
    return semi_bounded_bound(d, float(p["variance"]))
