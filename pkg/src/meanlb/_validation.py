"""Input checks shared by the public functions."""

from __future__ import annotations

import numpy as np

from .exceptions import DomainError


def check_sample(sample, name="sample"):
    """Return ``sample`` as a 1-D float array, rejecting empty or non-finite input."""
    values = getattr(sample, "values", sample)
    x = np.asarray(values, dtype=float)
    if x.ndim == 0:
        x = x.reshape(1)
    if x.ndim != 1:
        raise DomainError(f"{name} must be one-dimensional")
    if x.size == 0:
        raise DomainError(f"{name} is empty")
    if not np.all(np.isfinite(x)):
        raise DomainError(f"{name} contains non-finite values")
    return x


def empirical(x):
    """Distinct sorted values of ``x`` and their empirical frequencies."""
    pts, counts = np.unique(x, return_counts=True)
    return pts, counts / x.size


def check_probability(delta, name="delta", allow_one=False):
    ok = 0.0 < delta <= 1.0 if allow_one else 0.0 < delta < 1.0
    if not ok:
        raise DomainError(f"{name} must lie in (0, 1{']' if allow_one else ')'}, got {delta!r}")
    return float(delta)


def check_count(n, name="n"):
    if int(n) != n or n < 1:
        raise DomainError(f"{name} must be a positive integer, got {n!r}")
    return int(n)
