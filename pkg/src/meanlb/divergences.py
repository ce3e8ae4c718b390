"""Divergences between finite-support distributions and two closed forms.

All atom sums use :func:`math.fsum`. Infinite divergences are returned as
``math.inf``; no finite sentinel is ever used.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .distributions import DiscreteDist
from .exceptions import DomainError, NumericalError

__all__ = [
    "DivergenceValue",
    "DataProcessingReport",
    "ChangeOfMeasureReport",
    "kl_discrete",
    "renyi_discrete",
    "hellinger_discrete",
    "chernoff_discrete",
    "renyi_half_gaussian",
    "kl_gaussian",
    "kl_laplace_shift",
    "verify_data_processing",
    "verify_change_of_measure",
]

MAX_ENUMERATION = 1_000_000


@dataclass(frozen=True)
class DivergenceValue:
    """A divergence with its provenance.

    ``exact`` is True for closed forms and direct atom sums; ``residual`` is
    the solver residual of iterative computations (0 otherwise).
    """

    value: float
    exact: bool = True
    residual: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "value", float(self.value))
        object.__setattr__(self, "residual", float(self.residual))
        if not (self.value >= 0) or not (self.residual >= 0):
            raise NumericalError(f"invalid divergence {self.value!r} (residual {self.residual!r})")

    @property
    def is_infinite(self):
        return math.isinf(self.value)

    def __float__(self):
        return float(self.value)


def _align(P, Q):
    """Log-weights of P and Q on the union support (``-inf`` off-support)."""
    pts = np.union1d(P.points, Q.points)
    lp = np.full(pts.size, -np.inf)
    lq = np.full(pts.size, -np.inf)
    lp[np.searchsorted(pts, P.points)] = P.log_weights
    lq[np.searchsorted(pts, Q.points)] = Q.log_weights
    return pts, lp, lq


def _logsumexp(a):
    a = np.asarray(a, dtype=float)
    finite = a[np.isfinite(a)]
    if finite.size == 0:
        return -math.inf
    top = finite.max()
    return top + math.log(math.fsum(np.exp(finite - top)))


def kl_discrete(P, Q):
    """``KL(P, Q) = sum_i p_i log(p_i / q_i)`` over the support of ``P``."""
    _, lp, lq = _align(P, Q)
    on = np.isfinite(lp)
    if np.any(~np.isfinite(lq[on])):
        return DivergenceValue(math.inf)
    val = math.fsum(np.exp(lp[on]) * (lp[on] - lq[on]))
    return DivergenceValue(max(val, 0.0))


def _log_affinity(alpha, lp, lq):
    both = np.isfinite(lp) & np.isfinite(lq)
    if not np.any(both):
        return -math.inf
    return _logsumexp(alpha * lp[both] + (1.0 - alpha) * lq[both])


def renyi_discrete(alpha, P, Q):
    """Renyi divergence of order ``alpha`` in (0, 1).

    ``D_alpha(P, Q) = -log(sum_i p_i^alpha q_i^(1-alpha)) / (1 - alpha)``,
    infinite exactly when the supports are disjoint.
    """
    if not 0.0 < alpha < 1.0:
        raise DomainError("alpha must lie in (0, 1)")
    _, lp, lq = _align(P, Q)
    la = _log_affinity(alpha, lp, lq)
    if la == -math.inf:
        return DivergenceValue(math.inf)
    return DivergenceValue(max(-la / (1.0 - alpha), 0.0))


def hellinger_discrete(P, Q, squared=False):
    """Hellinger distance ``H = sqrt(sum (sqrt p - sqrt q)^2 / 2)``.

    The squared distance is computed as ``1 - BC`` with ``BC`` the Bhattacharyya
    affinity, which keeps ``D_1/2 / 2 = -log(1 - H^2)`` exact to rounding.
    """
    _, lp, lq = _align(P, Q)
    la = _log_affinity(0.5, lp, lq)
    h2 = -math.expm1(la) if la > -math.inf else 1.0
    h2 = min(max(h2, 0.0), 1.0)
    return DivergenceValue(h2 if squared else math.sqrt(h2))


def _chernoff_gap(alpha, lp, lq):
    """Return ``(log Z, gap)`` for the geometric mixture ``P_a ~ F^a G^(1-a)``.

    ``gap = KL(P_a, F) - KL(P_a, G) = E_{P_a}[log G - log F]``.
    """
    la = alpha * lp + (1.0 - alpha) * lq
    logz = _logsumexp(la)
    w = np.exp(la - logz)
    return logz, math.fsum(w * (lq - lp))


def chernoff_discrete(F, G, tol=1e-10, max_iter=200):
    """Chernoff divergence ``inf_P max(KL(P, F), KL(P, G))`` and its minimiser.

    The minimiser lies in the geometric family ``P_a ~ F^a G^(1-a)`` on the
    common support; ``a`` is located by bisection on the gap
    ``KL(P_a, F) - KL(P_a, G)``, whose derivative in ``a`` is minus a variance
    and hence never positive. The returned value is ``-log Z(a)``, which is
    stationary at the optimum; ``residual`` is the remaining gap
    ``|KL(P*, F) - KL(P*, G)|``.

    Returns
    -------
    (DivergenceValue, DiscreteDist or None)
        The minimiser is None when the supports are disjoint.
    """
    if not tol > 0:
        raise DomainError("tol must be positive")
    pts, lf, lg = _align(F, G)
    both = np.isfinite(lf) & np.isfinite(lg)
    if not np.any(both):
        return DivergenceValue(math.inf, exact=False), None
    pts, lf, lg = pts[both], lf[both], lg[both]

    def finish(alpha, logz, gap, residual):
        star = DiscreteDist.from_log_weights(pts, alpha * lf + (1 - alpha) * lg - logz)
        return DivergenceValue(max(-logz, 0.0), exact=False, residual=residual), star

    lz0, g0 = _chernoff_gap(0.0, lf, lg)
    lz1, g1 = _chernoff_gap(1.0, lf, lg)
    if g0 < g1:
        raise NumericalError("Chernoff gap increases between the endpoints")
    # no crossing: one endpoint is optimal and the value is exact
    if g1 >= 0.0:
        return finish(1.0, lz1, g1, 0.0)
    if g0 <= 0.0:
        return finish(0.0, lz0, g0, 0.0)

    lo, hi, glo, ghi = 0.0, 1.0, g0, g1
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        lzm, gm = _chernoff_gap(mid, lf, lg)
        if not (ghi - 1e-12 <= gm <= glo + 1e-12):
            return _chernoff_golden(pts, lf, lg, tol, max_iter)
        if gm == 0.0:
            return finish(mid, lzm, gm, 0.0)
        if gm > 0.0:
            lo, glo = mid, gm
        else:
            hi, ghi = mid, gm
        if hi - lo <= tol:
            break
    mid = 0.5 * (lo + hi)
    lzm, gm = _chernoff_gap(mid, lf, lg)
    return finish(mid, lzm, gm, abs(gm))


def _chernoff_golden(pts, lf, lg, tol, max_iter):
    """Fallback: golden-section on ``max(KL(P_a, F), KL(P_a, G))``."""
    def objective(a):
        logz, gap = _chernoff_gap(a, lf, lg)
        return max((1 - a) * gap, -a * gap) - logz

    invphi = (math.sqrt(5) - 1) / 2
    a, b = 0.0, 1.0
    c, d = b - invphi * (b - a), a + invphi * (b - a)
    fc, fd = objective(c), objective(d)
    for _ in range(max_iter):
        if b - a <= tol:
            break
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - invphi * (b - a)
            fc = objective(c)
        else:
            a, c, fc = c, d, fd
            d = a + invphi * (b - a)
            fd = objective(d)
    alpha = 0.5 * (a + b)
    logz, gap = _chernoff_gap(alpha, lf, lg)
    star = DiscreteDist.from_log_weights(pts, alpha * lf + (1 - alpha) * lg - logz)
    return DivergenceValue(objective(alpha), exact=False, residual=abs(gap)), star


def renyi_half_gaussian(mu1, s1, mu2, s2):
    """Order-1/2 Renyi divergence between ``N(mu1, s1^2)`` and ``N(mu2, s2^2)``."""
    if not (s1 > 0 and s2 > 0):
        raise DomainError("scales must be positive")
    ssq = s1 * s1 + s2 * s2
    return -math.log(2.0 * s1 * s2 / ssq) + (mu1 - mu2) ** 2 / (2.0 * ssq)


def kl_gaussian(mu1, s1, mu2, s2):
    """``KL(N(mu1, s1^2), N(mu2, s2^2))``."""
    if not (s1 > 0 and s2 > 0):
        raise DomainError("scales must be positive")
    r = (s1 / s2) ** 2
    return 0.5 * (r - 1.0 - math.log(r) + (mu1 - mu2) ** 2 / s2 ** 2)


def kl_laplace_shift(delta, b):
    """KL between two Laplace laws of scale ``b`` whose locations differ by ``delta``.

    Equal to ``exp(-|delta|/b) + |delta|/b - 1``.
    """
    if not b > 0:
        raise DomainError("scale must be positive")
    x = abs(delta) / b
    return math.expm1(-x) + x


def _event_mask(points, E):
    if callable(E):
        return np.asarray(E(points), dtype=bool)
    return np.isin(points, np.asarray(list(E), dtype=float))


def _xlog1_over(p, q):
    """``p * log(1/q)`` with the convention ``0 * log(1/0) = 0``."""
    if p == 0.0:
        return 0.0
    return math.inf if q == 0.0 else -p * math.log(q)


@dataclass(frozen=True)
class DataProcessingReport:
    kl: float
    kl_bound: float
    renyi: tuple = field(default_factory=tuple)  # (alpha, (1-a) D_a, bound)
    holds: bool = True

    @property
    def kl_slack(self):
        return self.kl - self.kl_bound

    @property
    def min_renyi_slack(self):
        return min((lhs - rhs for _, lhs, rhs in self.renyi), default=math.inf)


def verify_data_processing(P, Q, E, alphas=None, atol=1e-12):
    """Check both event-based lower bounds on KL and on ``(1-a) D_a``.

    ``E`` is either a collection of points or a boolean predicate on points.
    """
    pts, lp, lq = _align(P, Q)
    mask = _event_mask(pts, E)
    p_e = math.fsum(np.exp(lp[mask]))
    q_e = math.fsum(np.exp(lq[mask]))
    q_ec = math.fsum(np.exp(lq[~mask]))
    kl = kl_discrete(P, Q).value
    kl_bound = _xlog1_over(p_e, q_e) - math.log(2.0)
    ok = kl >= kl_bound - atol
    if alphas is None:
        alphas = [k / 10 for k in range(1, 10)]
    rows = []
    top = max(p_e, q_ec)
    for a in alphas:
        lhs = (1.0 - a) * renyi_discrete(a, P, Q).value
        rhs = (min(a, 1.0 - a) * (math.inf if top == 0.0 else -math.log(top))) - math.log(2.0)
        rows.append((a, lhs, rhs))
        ok = ok and lhs >= rhs - atol
    return DataProcessingReport(kl, kl_bound, tuple(rows), bool(ok))


@dataclass(frozen=True)
class ChangeOfMeasureReport:
    lhs: float
    rhs: float
    holds: bool
    kl_pf: float
    kl_pg: float
    chain_rule_error: float

    @property
    def slack(self):
        return self.lhs - self.rhs


def verify_change_of_measure(P, F, G, n, E, beta, atol=1e-12):
    """Exhaustively check the n-sample three-point change-of-measure inequality.

    ``E`` maps an ``(m, n)`` array of outcomes to a boolean vector of length
    ``m``. The product space is enumerated exactly, so ``len(support) ** n``
    must not exceed one million. Along the way the chain rule
    ``KL(P^n, F^n) = n KL(P, F)`` is checked on the same enumeration.
    """
    if n < 1:
        raise DomainError("n must be at least 1")
    if not beta > 0:
        raise DomainError("beta must be positive")
    pts = np.union1d(np.union1d(P.points, F.points), G.points)
    m = pts.size
    if m ** n > MAX_ENUMERATION:
        raise DomainError(f"product space has {m}**{n} outcomes, above {MAX_ENUMERATION}")

    def logw(D):
        out = np.full(m, -np.inf)
        out[np.searchsorted(pts, D.points)] = D.log_weights
        return out

    lp, lf, lg = logw(P), logw(F), logw(G)
    idx = np.stack(np.unravel_index(np.arange(m ** n), (m,) * n), axis=1)
    outcomes = pts[idx]
    event = np.asarray(E(outcomes), dtype=bool)
    if event.shape != (m ** n,):
        raise DomainError("event callable must return one flag per outcome")

    kl_pf = kl_discrete(P, F).value
    kl_pg = kl_discrete(P, G).value
    lpn = lp[idx].sum(axis=1)
    pn = np.exp(lpn)
    fn = np.exp(lf[idx].sum(axis=1))
    gn = np.exp(lg[idx].sum(axis=1))
    on = pn > 0

    with np.errstate(divide="ignore", invalid="ignore"):
        llr_f = np.where(on, (lpn - lf[idx].sum(axis=1)) / n, 0.0)
        llr_g = np.where(on, (lpn - lg[idx].sum(axis=1)) / n, 0.0)
    tail_f = math.fsum(pn[on & (llr_f - kl_pf > beta)]) if math.isfinite(kl_pf) else 0.0
    tail_g = math.fsum(pn[on & (llr_g - kl_pg > beta)]) if math.isfinite(kl_pg) else 0.0
    rhs = 1.0 - tail_f - tail_g

    top = max(math.fsum(fn[event]), math.fsum(gn[~event]))
    expo = n * max(kl_pf, kl_pg) + n * beta
    if top == 0.0:
        lhs = 0.0
    else:
        lhs = 2.0 * top * math.exp(min(expo, 700.0)) if math.isfinite(expo) else math.inf
        if expo > 700.0:
            lhs = math.inf

    if math.isfinite(kl_pf):
        kl_n = math.fsum(pn[on] * n * llr_f[on])
        chain = abs(kl_n - n * kl_pf)
    else:
        chain = 0.0
    return ChangeOfMeasureReport(lhs, rhs, bool(lhs >= rhs - atol), kl_pf, kl_pg, chain)
