"""Moment-constrained KL projection of an empirical distribution.

``K_inf(P_hat, C) = inf {KL(P_hat, F) : F in C}`` for sets ``C`` fixed by a
mean constraint and a bound on a second moment. The value is computed from
the concave dual

    sup_{lambda in Lambda} mean_i log(1 + lambda1 g1(X_i) + lambda2 g2(X_i))

with ``g1(x) = s (x - m)`` (``s = +1`` for ``E[X] <= m``, ``s = -1`` for
``E[X] >= m``; free ``lambda1`` for ``E[X] = m``), ``g2(x) = (x - c)^2 - B``
with ``c = m`` or ``c = 0``, ``lambda2 >= 0``, and ``Lambda`` the set where the
quadratic ``1 + lambda . g(x)`` is nonnegative on the whole line.

Solver
------
In the coordinates ``Y = X - m`` the equality-mean feasible set ``Lambda`` is
an ellipse, mapped affinely onto the unit disk ``|u| <= 1`` by
``lambda1' = u1 / sqrt(V)`` and ``lambda2 = (1 + u2) / (2 V)`` where ``V`` is
the bound on the variance about ``m``. The objective becomes
``const + sum_j w_j log(1 + u . v_j)`` with unit vectors ``v_j``. On the
circle, parameterised by the position ``z = m + sqrt(V) tan(b)`` of the
double root of the quadratic, it reads ``2 sum_j w_j log|sin(b - beta_j)|``
plus a constant. That is strictly concave between consecutive poles
``beta_j = arctan(Y_j / sqrt(V))``, so every arc has one maximiser, found by
safeguarded Newton. A boundary point is globally optimal iff the outward
multiplier ``1 - sum_j w_j / (2 sin^2(b - beta_j))`` is nonnegative;
otherwise the optimum is interior and damped Newton from the disk centre
finds it. Inequality-mean constraints reuse the equality solution when its
``lambda1`` has the right sign and otherwise reduce to a one-dimensional
problem on ``lambda1 = 0``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from enum import Enum

import numba
import numpy as np

from ._validation import check_count, check_probability, check_sample, empirical
from .exceptions import DomainError, NumericalError

__all__ = [
    "MeanKind",
    "Centering",
    "MomentConstraints",
    "DualCertificate",
    "InfeasibleGridError",
    "kinf_dual",
    "kinf_primal_oracle",
    "oracle_grid",
    "recover_primal",
    "concentration_threshold",
    "verify_kinf_concentration",
    "ConcentrationReport",
]

HALF_PI = 0.5 * math.pi


class MeanKind(str, Enum):
    AT_MOST = "at_most"
    AT_LEAST = "at_least"
    EQUAL = "equal"


class Centering(str, Enum):
    RAW = "raw"
    ABOUT_M = "about_m"


class InfeasibleGridError(DomainError):
    """The constraint set is nonempty but no distribution on the grid meets it."""


@dataclass(frozen=True)
class MomentConstraints:
    """``{F : E_F[X] (<=|>=|=) m, E_F[(X - c)^2] <= B}`` with ``c = m`` or ``0``."""

    mean_kind: MeanKind
    mean_value: float
    second_moment_bound: float
    centering: Centering = Centering.ABOUT_M

    def __post_init__(self):
        object.__setattr__(self, "mean_kind", MeanKind(self.mean_kind))
        object.__setattr__(self, "centering", Centering(self.centering))
        if not (self.second_moment_bound > 0 and math.isfinite(self.second_moment_bound)):
            raise DomainError("second-moment bound must be positive and finite")
        if not math.isfinite(self.mean_value):
            raise DomainError("mean value must be finite")

    @property
    def center(self):
        return self.mean_value if self.centering is Centering.ABOUT_M else 0.0

    @property
    def sign(self):
        return -1.0 if self.mean_kind is MeanKind.AT_LEAST else 1.0

    @property
    def offset(self):
        """``c - m``: distance of the second-moment centre from the mean."""
        return self.center - self.mean_value

    @property
    def centered_bound(self):
        """``B' = B - (c - m)^2``, the implied bound on the variance about ``m``."""
        return self.second_moment_bound - self.offset ** 2

    def mean_implied(self):
        """True when the second-moment bound alone forces the mean constraint."""
        if self.mean_kind is MeanKind.EQUAL:
            return False
        return -self.sign * self.offset >= math.sqrt(self.second_moment_bound)

    def satisfied_by(self, pts, w):
        mean = math.fsum(w * pts)
        gap = self.sign * (mean - self.mean_value)
        if self.mean_kind is MeanKind.EQUAL:
            scale = max(1.0, float(np.max(np.abs(pts))))
            mean_ok = abs(gap) <= 1e-15 * scale
        else:
            mean_ok = gap <= 0.0
        return mean_ok and math.fsum(w * (pts - self.center) ** 2) <= self.second_moment_bound


@dataclass(frozen=True)
class DualCertificate:
    """Dual witness ``(lambda1, lambda2)`` in the caller's sign convention.

    ``residual`` is the KKT residual of the returned point. ``atom`` is the
    location of the double root of ``1 + lambda . g`` when the optimum lies
    on the boundary of ``Lambda`` (``None`` otherwise).
    """

    lambda1: float
    lambda2: float
    value: float
    feasible: bool
    residual: float
    atom: float | None = None


# --- numba kernels ------------------------------------------------------------

@numba.njit(cache=True)
def _arc_newton(beta, w, a, c, start):
    """Maximise ``2 sum w log|sin(b - beta)|`` strictly between poles ``a < c``."""
    lo, hi = a, c
    b = start if (start > a and start < c) else 0.5 * (a + c)
    for _ in range(200):
        d = 0.0
        dd = 0.0
        for j in range(beta.size):
            s = math.sin(b - beta[j])
            d += w[j] * math.cos(b - beta[j]) / s
            dd += w[j] / (s * s)
        if d > 0.0:
            lo = b
        elif d < 0.0:
            hi = b
        else:
            break
        step = d / dd
        if abs(step) <= 4e-16 * max(1.0, abs(b)):
            b += step
            break
        bn = b + step
        if not (bn > lo and bn < hi):
            bn = 0.5 * (lo + hi)
        b = bn
    val = 0.0
    d = 0.0
    nu = 1.0
    for j in range(beta.size):
        s = math.sin(b - beta[j])
        val += w[j] * math.log(abs(s))
        d += w[j] * math.cos(b - beta[j]) / s
        nu -= w[j] / (2.0 * s * s)
    return b, 2.0 * val, 2.0 * abs(d), nu


@numba.njit(cache=True)
def _arc_of(beta, b):
    """Index of the arc containing angle ``b`` (arcs start at each pole)."""
    k = beta.size
    t = b
    while t < beta[0]:
        t += math.pi
    while t >= beta[0] + math.pi:
        t -= math.pi
    j = np.searchsorted(beta, t, side="right") - 1
    return max(0, min(j, k - 1)), t


@numba.njit(cache=True)
def _interior_newton(v1, v2, w, u1, u2, max_iter):
    """Unconstrained maximiser of ``sum w log(1 + u . v_j)`` by damped Newton.

    Starts from ``u`` (which must make every factor positive). Returns
    ``(u1, u2, gradient norm, converged)``.
    """
    k = w.size
    for _ in range(max_iter):
        g1 = 0.0
        g2 = 0.0
        h11 = 0.0
        h12 = 0.0
        h22 = 0.0
        for j in range(k):
            r = 1.0 / (1.0 + u1 * v1[j] + u2 * v2[j])
            g1 += w[j] * v1[j] * r
            g2 += w[j] * v2[j] * r
            r2 = w[j] * r * r
            h11 += r2 * v1[j] * v1[j]
            h12 += r2 * v1[j] * v2[j]
            h22 += r2 * v2[j] * v2[j]
        det = h11 * h22 - h12 * h12
        if not det > 1e-14 * h11 * h22:
            return u1, u2, math.inf, False
        s1 = (h22 * g1 - h12 * g2) / det
        s2 = (h11 * g2 - h12 * g1) / det
        dec = g1 * s1 + g2 * s2
        if dec < 1e-26:
            return u1 + s1, u2 + s2, math.sqrt(g1 * g1 + g2 * g2), True
        step = 1.0 / (1.0 + math.sqrt(dec))
        u1 += step * s1
        u2 += step * s2
        if u1 * u1 + u2 * u2 > 4.0:
            # far outside the disk: the constrained optimum is on the circle
            return u1, u2, math.inf, False
    return u1, u2, math.inf, False


@numba.njit(cache=True)
def _barrier_point(v1, v2, w):
    """Approximate maximiser over the disk via a short log-barrier path.

    Maximises ``sum w log(1 + u . v_j) + t log(1 - |u|^2)`` for decreasing
    ``t`` by backtracking Newton from the centre. Only used to pick the arc
    (or the interior start) for the exact solvers.
    """
    k = w.size
    u1 = 0.0
    u2 = 0.0
    t = 1e-2
    for _ in range(4):
        for _ in range(60):
            q = 1.0 - u1 * u1 - u2 * u2
            g1 = -2.0 * t * u1 / q
            g2 = -2.0 * t * u2 / q
            h11 = 2.0 * t / q + 4.0 * t * u1 * u1 / (q * q)
            h22 = 2.0 * t / q + 4.0 * t * u2 * u2 / (q * q)
            h12 = 4.0 * t * u1 * u2 / (q * q)
            f0 = t * math.log(q)
            for j in range(k):
                r = 1.0 / (1.0 + u1 * v1[j] + u2 * v2[j])
                f0 -= w[j] * math.log(r)
                g1 += w[j] * v1[j] * r
                g2 += w[j] * v2[j] * r
                r2 = w[j] * r * r
                h11 += r2 * v1[j] * v1[j]
                h12 += r2 * v1[j] * v2[j]
                h22 += r2 * v2[j] * v2[j]
            det = h11 * h22 - h12 * h12
            s1 = (h22 * g1 - h12 * g2) / det
            s2 = (h11 * g2 - h12 * g1) / det
            dec = g1 * s1 + g2 * s2
            if dec < 1e-14:
                break
            a = 1.0
            for _ in range(60):
                n1 = u1 + a * s1
                n2 = u2 + a * s2
                qn = 1.0 - n1 * n1 - n2 * n2
                ok = qn > 0.0
                fn = 0.0
                if ok:
                    fn = t * math.log(qn)
                    for j in range(k):
                        z = 1.0 + n1 * v1[j] + n2 * v2[j]
                        if z <= 0.0:
                            ok = False
                            break
                        fn += w[j] * math.log(z)
                if ok and fn >= f0 + 0.25 * a * dec:
                    break
                a *= 0.5
            u1 += a * s1
            u2 += a * s2
        t *= 1e-2
    return u1, u2


@numba.njit(cache=True)
def _try_arc(beta, w, j, start, const):
    k = beta.size
    a = beta[j]
    c = beta[j + 1] if j + 1 < k else beta[0] + math.pi
    if c - a <= 1e-15:
        return -math.inf, start, math.inf, -1.0
    b, val, res, nu = _arc_newton(beta, w, a, c, start)
    return val + const, b, res, nu


@numba.njit(cache=True)
def _interior_value(v1, v2, w, u1, u2, const):
    val = const - math.log(2.0)
    for j in range(w.size):
        val += w[j] * math.log1p(u1 * v1[j] + u2 * v2[j])
    return val


@numba.njit(cache=True)
def _solve_equality(y, w, V, hmode, h1, h2):
    """Dual optimum for ``E[Y] = 0``, ``E[Y^2] <= V`` given distinct sorted ``y``.

    Returns ``(value, mode, p1, p2, residual)``; mode 0 means ``lambda = 0``,
    mode 1 a boundary point at angle ``p1``, mode 2 an interior point
    ``u = (p1, p2)``. ``(hmode, h1, h2)`` is a previous solution in the same
    format used as a warm start (``hmode = -1`` for none).
    """
    k = y.size
    m1 = 0.0
    m2 = 0.0
    top = 0.0
    for j in range(k):
        m1 += w[j] * y[j]
        m2 += w[j] * y[j] * y[j]
        top = max(top, abs(y[j]))
    if abs(m1) <= 1e-15 * max(1.0, top) and m2 <= V:
        return 0.0, 0, HALF_PI, 0.0, 0.0
    sq = math.sqrt(V)
    beta = np.arctan(y / sq)
    v1 = np.sin(2.0 * beta)
    v2 = -np.cos(2.0 * beta)
    const = 0.0
    for j in range(k):
        const += w[j] * math.log1p(y[j] * y[j] / V)

    # warm starts: an interior optimum is certified by lying in the disk,
    # a boundary one by a nonnegative outward multiplier
    if hmode == 2:
        u1, u2, res, ok = _interior_newton(v1, v2, w, h1, h2, 50) \
            if _inside(v1, v2, h1, h2) else (0.0, 0.0, math.inf, False)
        if ok and u1 * u1 + u2 * u2 < 1.0 and _inside(v1, v2, u1, u2):
            return max(_interior_value(v1, v2, w, u1, u2, const), 0.0), 2, u1, u2, res
    elif hmode == 1:
        j, t = _arc_of(beta, h1)
        val, b, res, nu = _try_arc(beta, w, j, t, const)
        if nu >= -1e-12:
            return max(val, 0.0), 1, b, 0.0, res

    # damped Newton from the strictly feasible barrier point stays in the
    # log domain; an optimum can sit very close to the circle, so always try it
    u1, u2 = _barrier_point(v1, v2, w)
    i1, i2, res, ok = _interior_newton(v1, v2, w, u1, u2, 100)
    if ok and i1 * i1 + i2 * i2 < 1.0 and _inside(v1, v2, i1, i2):
        return max(_interior_value(v1, v2, w, i1, i2, const), 0.0), 2, i1, i2, res
    j, t = _arc_of(beta, 0.5 * math.atan2(-u1, u2))
    val, b, res, nu = _try_arc(beta, w, j, t, const)
    if nu >= -1e-12:
        return max(val, 0.0), 1, b, 0.0, res

    # exhaustive fallback over every arc, then the interior
    best_b = HALF_PI
    best_val = -math.inf
    best_res = 0.0
    best_nu = -1.0
    for j in range(k):
        val, b, res, nu = _try_arc(beta, w, j, 0.5 * (beta[j] + (beta[j + 1] if j + 1 < k else beta[0] + math.pi)), const)
        if val > best_val:
            best_b, best_val, best_res, best_nu = b, val, res, nu
    if best_nu >= -1e-12:
        return max(best_val, 0.0), 1, best_b, 0.0, best_res
    i1, i2, res, ok = _interior_newton(v1, v2, w, 0.0, 0.0, 300)
    if ok and i1 * i1 + i2 * i2 <= 1.0 + 1e-12 and _inside(v1, v2, i1, i2):
        return max(_interior_value(v1, v2, w, i1, i2, const), 0.0), 2, i1, i2, res
    # inconsistent optimality checks; return the best boundary point and flag it
    return max(best_val, 0.0), 1, best_b, 0.0, best_res - best_nu


@numba.njit(cache=True)
def _inside(v1, v2, u1, u2):
    for j in range(v1.size):
        if 1.0 + u1 * v1[j] + u2 * v2[j] <= 0.0:
            return False
    return True


@numba.njit(cache=True)
def _solve_line(x, w, c, B):
    """``max_{0 <= t <= 1/B} sum w log(1 + t ((x - c)^2 - B))``; returns (value, t)."""
    k = x.size
    g = np.empty(k)
    d0 = 0.0
    for j in range(k):
        g[j] = (x[j] - c) ** 2 - B
        d0 += w[j] * g[j]
    if d0 <= 0.0:
        return 0.0, 0.0
    lo = 0.0
    hi = 1.0 / B
    # derivative at the upper end; a zero factor there means -inf slope
    dh = 0.0
    pole = False
    for j in range(k):
        q = 1.0 + hi * g[j]
        if q <= 0.0:
            pole = True
            break
        dh += w[j] * g[j] / q
    if pole or dh < 0.0:
        t = 0.5 * (lo + hi)
        for _ in range(200):
            d = 0.0
            dd = 0.0
            for j in range(k):
                q = 1.0 / (1.0 + t * g[j])
                d += w[j] * g[j] * q
                dd += w[j] * (g[j] * q) ** 2
            if d > 0.0:
                lo = t
            else:
                hi = t
            step = d / dd
            if abs(step) <= 4e-16 * hi:
                t += step
                break
            tn = t + step
            if not (tn > lo and tn < hi):
                tn = 0.5 * (lo + hi)
            t = tn
    else:
        t = hi
    val = 0.0
    for j in range(k):
        val += w[j] * math.log1p(t * g[j])
    return max(val, 0.0), t


# --- public API ---------------------------------------------------------------

def _equality_lambdas(mode, p1, p2, V):
    """``(lambda1', lambda2, atom offset)`` from a solver point."""
    if mode == 0:
        return 0.0, 0.0, None
    sq = math.sqrt(V)
    if mode == 1:
        lam1p = -math.sin(2.0 * p1) / sq
        lam2 = math.cos(p1) ** 2 / V
        atom = sq * math.tan(p1) if lam2 > 0 else None
        return lam1p, lam2, atom
    return p1 / sq, (1.0 + p2) / (2.0 * V), None


def lambda_feasible(cons, lambda1, lambda2, rtol=1e-9):
    """Closed-form membership of ``(lambda1, lambda2)`` in ``Lambda``.

    With ``lambda2 > 0`` the quadratic ``1 + lambda . g`` is nonnegative iff
    its discriminant is, i.e. ``lambda1'^2 <= 4 lambda2 (1 - lambda2 B')``;
    with ``lambda2 = 0`` it needs ``lambda1 = 0``.
    """
    if lambda2 < 0:
        return False
    if cons.mean_kind is not MeanKind.EQUAL and lambda1 < 0:
        return False
    if lambda2 == 0:
        return lambda1 == 0
    lam1p = cons.sign * lambda1 - 2.0 * cons.offset * lambda2
    lhs = lam1p * lam1p
    rhs = 4.0 * lambda2 * (1.0 - lambda2 * cons.centered_bound)
    scale = max(lhs, 4.0 * lambda2, 4.0 * lambda2 * lambda2 * abs(cons.centered_bound), 1e-300)
    return lhs - rhs <= rtol * scale


def kinf_dual(sample, cons, tol=1e-9):
    """Constrained KL projection of the empirical distribution of ``sample``.

    Parameters
    ----------
    sample : array-like or Sample
        Observations.
    cons : MomentConstraints
        Constraint set.
    tol : float
        Accepted KKT residual; larger residuals raise ``NumericalError``.

    Returns
    -------
    (float, DualCertificate)
    """
    x = check_sample(sample)
    pts, w = empirical(x)
    m, c, s = cons.mean_value, cons.center, cons.sign
    V = cons.centered_bound
    if cons.satisfied_by(pts, w):
        return 0.0, DualCertificate(0.0, 0.0, 0.0, True, 0.0)

    if V <= 0.0:
        if cons.mean_kind is MeanKind.EQUAL or not cons.mean_implied():
            if V == 0.0:
                # the set is the point mass at m and the sample is not
                return math.inf, DualCertificate(0.0, 0.0, math.inf, False, 0.0)
            raise DomainError("constraint set is empty (second-moment bound below (c - m)^2)")
        return _line_result(pts, w, cons, tol)

    value, mode, p1, p2, res = _solve_equality(pts - m, w, V, -1, 0.0, 0.0)
    lam1p, lam2, atom = _equality_lambdas(mode, p1, p2, V)
    lam1 = s * (lam1p + 2.0 * cons.offset * lam2)
    if cons.mean_kind is not MeanKind.EQUAL and lam1 < 0.0:
        return _line_result(pts, w, cons, tol)
    if res > tol:
        raise NumericalError(f"dual solver residual {res:.3g} above tolerance {tol:.3g}")
    cert = DualCertificate(lam1, lam2, value, lambda_feasible(cons, lam1, lam2), res,
                           None if atom is None else m + atom)
    return value, cert


def _line_result(pts, w, cons, tol):
    value, t = _solve_line(pts, w, cons.center, cons.second_moment_bound)
    # the solver returns exactly 1/B at the end of the segment; t * B may round below 1
    atom = cons.center if t >= 1.0 / cons.second_moment_bound else None
    # stationarity residual on the segment
    g = (pts - cons.center) ** 2 - cons.second_moment_bound
    with np.errstate(divide="ignore"):
        dv = float(np.sum(w * g / (1.0 + t * g)))
    res = 0.0 if (t == 0.0 and dv <= 0) or atom is not None else abs(dv) * t
    if res > tol:
        raise NumericalError(f"line solver residual {res:.3g} above tolerance {tol:.3g}")
    return value, DualCertificate(0.0, t, value, lambda_feasible(cons, 0.0, t), res, atom)


def recover_primal(sample, cons, cert):
    """Primal minimiser ``F`` read off a dual certificate.

    ``F`` puts mass ``p_i / (1 + lambda . g(X_i))`` on each sample point and
    the remaining mass on the double root of the quadratic.
    """
    from .distributions import DiscreteDist

    x = check_sample(sample)
    pts, w = empirical(x)
    if math.isinf(cert.value):
        raise DomainError("no distribution in the set is compatible with the sample")
    phi = (1.0 + cert.lambda1 * cons.sign * (pts - cons.mean_value)
           + cert.lambda2 * ((pts - cons.center) ** 2 - cons.second_moment_bound))
    mass = w / phi
    rest = 1.0 - math.fsum(mass)
    if cert.atom is not None and rest > 1e-14:
        return DiscreteDist(np.append(pts, cert.atom), np.append(mass, rest))
    return DiscreteDist(pts, mass / math.fsum(mass))


def oracle_grid(sample, cons, coarse=401, rounds=4, patch=41):
    """Grid for the primal oracle built without looking at the dual solution.

    It holds the sample points, a uniform cover of the data range widened by
    a few bound-widths, geometrically spaced far points on both sides, and
    patches that zoom in on the off-sample mass of successive primal solves
    (each round shrinks the local spacing twentyfold).
    """
    x = check_sample(sample)
    scale = math.sqrt(cons.second_moment_bound) + float(np.ptp(x)) + 1e-12
    lo = min(x.min(), cons.mean_value) - 4.0 * scale
    hi = max(x.max(), cons.mean_value) + 4.0 * scale
    far = scale * 4.0 * 2.0 ** np.arange(1, 8)

    def initial(k):
        g = np.union1d(np.unique(x), np.linspace(lo, hi, k))
        return np.union1d(g, np.concatenate([lo - far, hi + far]))

    # the conic solver occasionally stalls on one resolution; try a couple of others
    for k in (coarse, 2 * coarse - 1, coarse // 2 + 1):
        grid = initial(k)
        try:
            _, F = _primal_solve(x, cons, grid)
            break
        except NumericalError:
            if k == coarse // 2 + 1:
                raise
    step = (hi - lo) / (k - 1)
    # only grids the solver has handled are ever returned
    for r in range(rounds + 1):
        if r > 0:
            try:
                _, F = _primal_solve(x, cons, grid)
            except NumericalError:
                return good
        good = grid
        off = ~np.isin(grid, x) & (F > 1e-10)
        if r == rounds or not np.any(off):
            break
        heavy = grid[off][np.argmax(F[off])]
        # local spacing at the heaviest atom decides the patch width
        i = np.searchsorted(grid, heavy)
        local = max(grid[min(i + 1, grid.size - 1)] - heavy, heavy - grid[max(i - 1, 0)], step / 400)
        # far points that carry no mass only hurt the conditioning of later rounds
        outside = (grid < lo) | (grid > hi)
        grid = grid[~outside | (F > 1e-10)]
        grid = _merge_grid(grid, heavy + np.linspace(-2 * local, 2 * local, patch), x, scale)
    return good


def _merge_grid(grid, extra, keep, scale):
    """Union of two grids without near-duplicate points (sample points always kept)."""
    merged = np.union1d(grid, extra)
    tol = 1e-9 * scale
    out = [merged[0]]
    for p in merged[1:]:
        if p - out[-1] > tol:
            out.append(p)
        elif np.isin(p, keep):
            out[-1] = p
    return np.union1d(np.asarray(out), keep)


def _primal_solve(x, cons, grid):
    import cvxpy as cp

    pts, w = empirical(x)
    grid = np.asarray(grid, dtype=float)
    pos = np.searchsorted(grid, pts)
    if np.any(pos >= grid.size) or np.any(grid[np.minimum(pos, grid.size - 1)] != pts):
        raise DomainError("grid must contain every sample point")
    # standardise positions so the conic solver sees O(1) data; when the
    # grid reaches far out, scaling by its extent conditions the problem better
    shift = cons.mean_value
    base = math.sqrt(cons.second_moment_bound)
    z0 = (grid - shift) / base
    zc0 = (cons.center - shift) / base
    reach = max(float(np.max(np.abs(grid - shift))), abs(cons.center - shift)) / base
    neg_ent = math.fsum(w * np.log(w))
    tight = dict(tol_gap_abs=1e-11, tol_gap_rel=1e-11, tol_feas=1e-11, max_iter=500)
    mid = dict(tol_gap_abs=1e-10, tol_gap_rel=1e-10, tol_feas=1e-10, max_iter=500)
    # Clarabel is sensitive to scaling on wide grids; stronger equilibration
    # and mild regularisation rescue most of its inaccurate exits
    settings = [tight, dict(tight, equilibrate_max_iter=100), mid,
                dict(mid, equilibrate_max_iter=100),
                dict(mid, static_regularization_constant=1e-7),
                dict(static_regularization_constant=1e-6)]
    attempts = [(1.0, o) for o in settings]
    if reach > 1.0:
        attempts += [(reach, o) for o in settings[:4]]
    last = None
    for factor, opts in attempts:
        z, zc = z0 / factor, zc0 / factor
        F = cp.Variable(grid.size, nonneg=True)
        mean = z @ F
        cons_list = [cp.sum(F) == 1, ((z - zc) ** 2) @ F <= 1.0 / factor ** 2]
        if cons.mean_kind is MeanKind.EQUAL:
            cons_list.append(mean == 0.0)
        elif cons.mean_kind is MeanKind.AT_MOST:
            cons_list.append(mean <= 0.0)
        else:
            cons_list.append(mean >= 0.0)
        prob = cp.Problem(cp.Minimize(neg_ent - w @ cp.log(F[pos])), cons_list)
        try:
            # inaccurate exits are judged by the explicit feasibility check below
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", UserWarning)
                prob.solve(solver=cp.CLARABEL, **opts)
        except cp.SolverError as exc:
            last = f"primal oracle solver failed: {exc}"
            continue
        if prob.status in (cp.INFEASIBLE, cp.INFEASIBLE_INACCURATE):
            raise InfeasibleGridError("no distribution on the grid satisfies the constraints")
        if prob.status not in (cp.OPTIMAL, cp.OPTIMAL_INACCURATE):
            last = f"primal oracle ended with status {prob.status}"
            continue
        sol = np.maximum(np.asarray(F.value, dtype=float), 0.0)
        viol = _violation(sol, z0, zc0, cons.mean_kind)
        if viol <= _ORACLE_FEAS_TOL:
            return float(prob.value), sol
        last = f"primal oracle solution violates the constraints by {viol:.2e}"
    raise NumericalError(last)


_ORACLE_FEAS_TOL = 1e-7


def _violation(F, z, zc, kind):
    """Largest constraint violation of a grid solution in standardised units."""
    mean = math.fsum(F * z)
    worst = max(abs(math.fsum(F) - 1.0), math.fsum(F * (z - zc) ** 2) - 1.0)
    if kind is MeanKind.EQUAL:
        worst = max(worst, abs(mean))
    elif kind is MeanKind.AT_MOST:
        worst = max(worst, mean)
    else:
        worst = max(worst, -mean)
    return worst


def kinf_primal_oracle(sample, cons, grid):
    """Minimise ``KL(P_hat, F)`` over ``F`` supported on ``grid`` (test oracle).

    Solved as a convex program with an interior-point conic solver. The
    result upper-bounds the true projection; the gap shrinks with the grid
    spacing near the optimal extra atom.
    """
    x = check_sample(sample)
    if cons.satisfied_by(*empirical(x)):
        return 0.0
    value, _ = _primal_solve(x, cons, grid)
    return max(value, 0.0)


def concentration_threshold(n, delta):
    """``log(e (n + 1)^2 / delta) / n``."""
    n = check_count(n)
    delta = check_probability(delta, allow_one=True)
    return (1.0 + 2.0 * math.log1p(n) - math.log(delta)) / n


@dataclass(frozen=True)
class ConcentrationReport:
    exceed_rate: float
    se: float
    trials: int
    threshold: float
    exceeded: int
    delta: float

    @property
    def within_slack(self):
        return self.exceed_rate <= self.delta + 3.0 * self.se


def _concentration_trial(args):
    dist, n, seed, trial, m, var, thr = args
    from .distributions import sample as draw

    x = draw(dist, n, seed, trial).values
    cons = MomentConstraints(MeanKind.AT_MOST, m, max(var, 1e-300), Centering.ABOUT_M)
    value, _ = kinf_dual(x, cons)
    return value >= thr


def verify_kinf_concentration(dist, n, delta, trials, seed, workers=1):
    """Empirical rate of ``K_inf >= threshold`` with the true mean and variance.

    The constraint set is ``{E[X] <= m, E[(X - m)^2] <= sigma^2}``.
    """
    from ._parallel import map_trials
    from .distributions import moments

    n = check_count(n)
    delta = check_probability(delta)
    m, var = moments(dist)
    thr = concentration_threshold(n, delta)
    flags = map_trials(_concentration_trial,
                       [(dist, n, seed, t, m, var, thr) for t in range(trials)], workers)
    hits = int(sum(flags))
    rate = hits / trials
    return ConcentrationReport(rate, math.sqrt(rate * (1 - rate) / trials), trials, thr, hits, delta)
