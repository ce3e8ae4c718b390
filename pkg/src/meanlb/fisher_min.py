"""Minimal Fisher information over two corruption neighbourhoods.

``solve_omega`` handles ``{F : F((-1, 1)) >= 1 - eps}`` and ``solve_huber_k``
the Gaussian contamination neighbourhood ``{(1 - eps) Phi + eps H}``.
``fisher_numeric`` integrates ``f'^2 / f`` and serves as an independent check.

The normal density and distribution function come from :func:`math.erfc`,
whose double-precision error is a few ulp; that is what lets both root
solves reach residuals near machine precision.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate
from scipy.optimize import bisect

from .exceptions import DomainError, NumericalError

__all__ = [
    "FisherSolveResult",
    "norm_pdf",
    "norm_cdf",
    "solve_omega",
    "solve_huber_k",
    "huber_minimal_information",
    "huber_least_favorable_pdf",
    "fisher_numeric",
    "fisher_sweep",
]

SQRT2 = math.sqrt(2.0)
INV_SQRT_2PI = 1.0 / math.sqrt(2.0 * math.pi)
OMEGA_BRACKET = (1e-9, math.pi - 1e-9)
K_BRACKET = (1e-9, 10.0)


def norm_pdf(x):
    return INV_SQRT_2PI * math.exp(-0.5 * x * x)


def norm_cdf(x):
    """Standard normal distribution function, accurate in both tails."""
    return 0.5 * math.erfc(-x / SQRT2)


@dataclass(frozen=True)
class FisherSolveResult:
    epsilon: float
    root: float
    info: float
    residual: float


def _solve_decreasing(g, lo, hi, name):
    """Root of a decreasing ``g`` on ``[lo, hi]`` after checking monotonicity on samples."""
    grid = np.linspace(lo, hi, 65)
    vals = np.array([g(t) for t in grid])
    if np.any(np.diff(vals) > 1e-15 * np.maximum(1.0, np.abs(vals[1:]))):
        raise NumericalError(f"{name} equation is not decreasing on its bracket")
    if not (vals[0] > 0.0 > vals[-1]):
        raise NumericalError(f"{name} root is not bracketed")
    root = bisect(g, lo, hi, xtol=1e-300, rtol=4 * np.finfo(float).eps, maxiter=5000)
    return root, abs(g(root))


def _interval_eps(omega):
    return 2.0 * math.cos(0.5 * omega) ** 2 / (omega * math.tan(0.5 * omega) + 2.0)


def solve_omega(eps):
    """Root ``omega`` in (0, pi) of the interval-mass equation and ``I_1(eps)``.

    ``eps = 2 cos^2(omega/2) / (omega tan(omega/2) + 2)`` and
    ``I_1 = omega^2 / (1 + 2 / (omega tan(omega/2)))``.
    """
    if not 0.0 < eps < 1.0:
        raise DomainError("eps must lie in (0, 1)")
    omega, res = _solve_decreasing(lambda w: _interval_eps(w) - eps, *OMEGA_BRACKET, "omega")
    info = omega ** 2 / (1.0 + 2.0 / (omega * math.tan(0.5 * omega)))
    return FisherSolveResult(eps, omega, info, res)


def _huber_lhs(k):
    return 2.0 * norm_pdf(k) / k - 2.0 * norm_cdf(-k)


def solve_huber_k(eps):
    """Clipping point ``k`` of the contamination neighbourhood and the display ``I_2``.

    ``k`` solves ``2 phi(k)/k - 2 Phi(-k) = eps / (1 - eps)``, and

    ``I_2 = (1-eps)(2 Phi(k/2) - 1) + (1-eps)/sqrt(2 pi) (2 e^{-k^2/2}/k - 2 k e^{-k^2/2})``.

    This display is not the Fisher information of the least favourable
    density; that value is :func:`huber_minimal_information`.
    """
    if not 0.0 < eps < 0.5:
        raise DomainError("eps must lie in (0, 1/2)")
    target = eps / (1.0 - eps)
    k, res = _solve_decreasing(lambda t: _huber_lhs(t) - target, *K_BRACKET, "k")
    e = math.exp(-0.5 * k * k)
    info = ((1.0 - eps) * (2.0 * norm_cdf(0.5 * k) - 1.0)
            + (1.0 - eps) * INV_SQRT_2PI * (2.0 * e / k - 2.0 * k * e))
    return FisherSolveResult(eps, k, info, res)


def huber_least_favorable_pdf(eps):
    """Least favourable density of the contamination neighbourhood and its derivative.

    Gaussian in ``[-k, k]`` scaled by ``1 - eps``, exponential tails outside.
    """
    k = solve_huber_k(eps).root
    c = (1.0 - eps)

    def f(x):
        x = np.asarray(x, dtype=float)
        ax = np.abs(x)
        inner = c * INV_SQRT_2PI * np.exp(-0.5 * x * x)
        outer = c * norm_pdf(k) * np.exp(-k * (ax - k))
        return np.where(ax <= k, inner, outer)

    def fp(x):
        x = np.asarray(x, dtype=float)
        score = np.where(np.abs(x) <= k, x, k * np.sign(x))
        return -score * f(x)

    return f, fp, k


def huber_minimal_information(eps):
    """``(1 - eps)(2 Phi(k) - 1)``: information of the least favourable density."""
    k = solve_huber_k(eps).root
    return (1.0 - eps) * (2.0 * norm_cdf(k) - 1.0)


def fisher_numeric(f, fprime, support=(-math.inf, math.inf), breakpoints=None):
    """``integral of f'(x)^2 / f(x)`` by adaptive quadrature (0 where ``f = 0``).

    Parameters
    ----------
    f, fprime : callable
        Density and its derivative.
    support : (float, float)
        Integration range; infinite ends are allowed.
    breakpoints : sequence of float, optional
        Points where ``f`` is not smooth.

    Raises
    ------
    DomainError
        When ``f`` does not integrate to 1 within 1e-8 on ``support``.
    """
    a, b = support
    if not a < b:
        raise DomainError("empty support")
    pts = None if breakpoints is None else [p for p in breakpoints if a < p < b]

    def quad(fn):
        if pts and math.isfinite(a) and math.isfinite(b):
            val, _ = integrate.quad(fn, a, b, points=pts, limit=500, epsabs=1e-13, epsrel=1e-12)
            return val
        edges = [a] + sorted(pts or []) + [b]
        return math.fsum(integrate.quad(fn, lo, hi, limit=500, epsabs=1e-13, epsrel=1e-12)[0]
                         for lo, hi in zip(edges[:-1], edges[1:]))

    mass = quad(lambda x: float(f(x)))
    if abs(mass - 1.0) > 1e-8:
        raise DomainError(f"density integrates to {mass!r}, not 1")

    def integrand(x):
        fx = float(f(x))
        if fx <= 0.0:
            return 0.0
        return float(fprime(x)) ** 2 / fx

    return quad(integrand)


def fisher_sweep(family, eps_values=None):
    """``(eps, root, info, residual)`` rows over a log-spaced grid of ``eps``.

    ``family`` is ``"interval_mass"`` or ``"huber"``; the default grid has 97
    points between 0.01 and 0.49.
    """
    if eps_values is None:
        eps_values = np.geomspace(0.01, 0.49, 97)
    solver = {"interval_mass": solve_omega, "huber": solve_huber_k}.get(family)
    if solver is None:
        raise DomainError(f"no sweep for family {family!r}")
    return [solver(float(e)) for e in eps_values]
