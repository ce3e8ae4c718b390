"""Seeded Monte Carlo runs of mean estimators against deviation thresholds.

A run is described by an :class:`ExperimentConfig`, written as line-oriented
``key = value`` text::

    # comments and blank lines are ignored
    distribution = gaussian(0, 1)
    estimators = mean, mom(5), minkl
    n = 20
    deltas = 0.1, 0.05
    trials = 2000
    seed = 7
    workers = 4
    bound_class = gaussian
    output = results.csv

Every trial draws one sample from the substream of its index, so results
do not depend on ``workers``.

Thresholds
----------
``minkl`` without a fixed ``y`` is refitted for every delta with
``y = y_schedule(n, delta)`` and judged against ``sqrt(2 sigma^2 y)``; a
fixed ``minkl(y=...)`` uses that ``y``. The other estimators are judged
against the sub-Gaussian width ``sqrt(2 sigma^2 log(2/delta) / n)``.
A trial exceeds when ``|error| >= threshold``; for a zero threshold only a
strictly positive error counts, so exact recovery never exceeds.
"""

from __future__ import annotations

import csv
import io
import math
import re
from dataclasses import dataclass, field

import numpy as np

from ._parallel import map_trials
from .bounds import BOUND_CLASSES, BoundQuery, compute_bound
from .distributions import Seed, moments, parse_distribution, sample
from .estimator import MinKLMeanEstimator, parse_estimator, y_schedule
from .exceptions import ConfigError, DomainError

__all__ = [
    "CSV_HEADER",
    "CSV_COLUMNS",
    "ExperimentConfig",
    "DeviationRecord",
    "ExperimentResult",
    "parse_config",
    "run_experiment",
    "quantile_curve",
    "estimator_threshold",
    "bound_width",
]

CSV_HEADER = "# meanlb-csv v1"
CSV_COLUMNS = ("estimator", "n", "delta", "trials", "exceed_rate", "se", "threshold",
               "bound_class", "bound_value", "seed")
QUANTILE_COLUMNS = ("estimator", "n", "delta", "trials", "q", "abs_error_quantile", "seed")
KEYS = ("distribution", "estimators", "n", "deltas", "trials", "seed", "workers",
        "bound_class", "output")
REQUIRED = ("distribution", "estimators", "n", "deltas", "trials", "seed")
MIN_TRIALS = 100

_BOUND = re.compile(r"^\s*(?P<name>[a-z_0-9]+)\s*(?:\((?P<args>[^)]*)\))?\s*$")


def _split_top(text):
    """Split on commas outside brackets, returning ``(offset, piece)`` pairs."""
    out, depth, start = [], 0, 0
    for i, ch in enumerate(text):
        if ch in "([":
            depth += 1
        elif ch in ")]":
            depth -= 1
        elif ch == "," and depth == 0:
            out.append((start, text[start:i]))
            start = i + 1
    out.append((start, text[start:]))
    return [(off + len(p) - len(p.lstrip()), p.strip()) for off, p in out]


def _parse_bound(text, line=None, column=None):
    m = _BOUND.match(text)
    if not m or m.group("name") not in BOUND_CLASSES:
        raise ConfigError(f"unknown bound class {text.strip()!r}", line, column)
    params = {}
    if m.group("args") and m.group("args").strip():
        for _, item in _split_top(m.group("args")):
            key, eq, val = item.partition("=")
            try:
                if not eq:
                    raise ValueError
                params[key.strip()] = float(val)
            except ValueError:
                raise ConfigError(f"bad bound parameter {item!r}", line, column) from None
    try:
        BoundQuery(m.group("name"), 1, 0.5, params)
    except DomainError as exc:
        raise ConfigError(str(exc), line, column) from None
    return m.group("name"), params


@dataclass(frozen=True)
class ExperimentConfig:
    """Validated experiment description.

    ``distribution``, ``estimators`` and ``bound_class`` keep their literal
    text so that :meth:`to_text` and :func:`parse_config` are exact inverses.
    """

    distribution: str
    estimators: tuple
    n: int
    deltas: tuple
    trials: int
    seed: int
    workers: int = 1
    bound_class: str = "gaussian"
    output: str | None = None
    _dist: object = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        dist = self._dist if self._dist is not None else parse_distribution(self.distribution)
        object.__setattr__(self, "_dist", dist)
        object.__setattr__(self, "estimators", tuple(e.strip() for e in self.estimators))
        object.__setattr__(self, "deltas", tuple(float(d) for d in self.deltas))
        for e in self.estimators:
            parse_estimator(e)
        _parse_bound(self.bound_class)
        if not self.estimators:
            raise ConfigError("at least one estimator is required")
        if len(set(self.estimators)) != len(self.estimators):
            raise ConfigError("estimators must be distinct")
        if int(self.n) != self.n or self.n < 1:
            raise ConfigError("n must be a positive integer")
        if not self.deltas or any(not 0.0 < d < 1.0 for d in self.deltas):
            raise ConfigError("deltas must lie in (0, 1)")
        if any(b >= a for a, b in zip(self.deltas, self.deltas[1:])):
            raise ConfigError("deltas must be strictly decreasing")
        if int(self.trials) != self.trials or self.trials < MIN_TRIALS:
            raise ConfigError(f"trials must be an integer of at least {MIN_TRIALS}")
        if int(self.workers) != self.workers or self.workers < 1:
            raise ConfigError("workers must be a positive integer")
        Seed(int(self.seed))

    @property
    def dist(self):
        return self._dist

    def to_text(self):
        lines = [
            f"distribution = {self.distribution}",
            f"estimators = {', '.join(self.estimators)}",
            f"n = {self.n}",
            f"deltas = {', '.join(repr(d) for d in self.deltas)}",
            f"trials = {self.trials}",
            f"seed = {self.seed}",
            f"workers = {self.workers}",
            f"bound_class = {self.bound_class}",
        ]
        if self.output is not None:
            lines.append(f"output = {self.output}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text):
        return parse_config(text)


def _int_value(raw, key, line, col):
    try:
        return int(raw)
    except ValueError:
        raise ConfigError(f"{key} must be an integer, got {raw!r}", line, col) from None


def parse_config(text):
    """Parse configuration text; errors carry the 1-based line and column."""
    seen, where = {}, {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        stripped = raw.strip()
        if not stripped or stripped.startswith("#"):
            continue
        if "=" not in raw:
            raise ConfigError("expected 'key = value'", lineno, len(raw) - len(raw.lstrip()) + 1)
        key_part, _, value = raw.partition("=")
        key = key_part.strip()
        kcol = len(key_part) - len(key_part.lstrip()) + 1
        if key not in KEYS:
            raise ConfigError(f"unknown key {key!r}", lineno, kcol)
        if key in seen:
            raise ConfigError(f"duplicate key {key!r}", lineno, kcol)
        vcol = len(key_part) + 2 + (len(value) - len(value.lstrip()))
        seen[key] = value.strip()
        where[key] = (lineno, vcol)
    dist = None
    if "distribution" in seen:
        line, col = where["distribution"]
        dist = parse_distribution(seen["distribution"], line, col - 1)

    estimators = []
    if "estimators" in seen:
        line, col = where["estimators"]
        for off, item in _split_top(seen["estimators"]):
            parse_estimator(item, line, col + off)
            estimators.append(item)

    deltas = []
    if "deltas" in seen:
        line, col = where["deltas"]
        for off, item in _split_top(seen["deltas"]):
            try:
                deltas.append(float(item))
            except ValueError:
                raise ConfigError(f"bad delta {item!r}", line, col + off) from None

    ints = {k: _int_value(seen[k], k, *where[k]) for k in ("n", "trials", "seed", "workers")
            if k in seen}
    bound = seen.get("bound_class", "gaussian")
    if "bound_class" in seen:
        _parse_bound(bound, *where["bound_class"])
    for key in REQUIRED:
        if key not in seen:
            raise ConfigError(f"missing key {key!r}")
    try:
        return ExperimentConfig(
            distribution=seen["distribution"], estimators=tuple(estimators), n=ints["n"],
            deltas=tuple(deltas), trials=ints["trials"], seed=ints["seed"],
            workers=ints.get("workers", 1), bound_class=bound, output=seen.get("output"),
            _dist=dist)
    except ConfigError as exc:
        if exc.line is not None:
            raise
        key = _blame(str(exc))
        raise ConfigError(str(exc), *where.get(key, (None, None))) from None


def _blame(message):
    for key in ("deltas", "trials", "workers", "estimators", "seed", "n"):
        if message.startswith(key) or f" {key} " in message:
            return key
    return "distribution"


# --- running ------------------------------------------------------------------

def _depends_on_delta(est):
    return isinstance(est, MinKLMeanEstimator) and est.y is None


def estimator_threshold(est, n, delta, variance):
    """Deviation width an estimator is judged against (see module notes)."""
    if isinstance(est, MinKLMeanEstimator):
        y = y_schedule(n, delta) if est.y is None else float(est.y)
        return math.sqrt(2.0 * variance * y)
    return math.sqrt(2.0 * variance * math.log(2.0 / delta) / n)


def bound_width(bound_class, params, n, delta, variance):
    """Lower bound expressed as a deviation width in data units.

    ``y``-type values become ``sqrt(2 sigma^2 y)`` and ``eta`` values
    ``eta / sqrt(n)``; ``epsilon`` is already a width. The Laplace class has
    no width and reports its delta floor unchanged.
    """
    res = compute_bound(BoundQuery(bound_class, int(n), delta, params))
    if res.kind == "y":
        return math.sqrt(2.0 * variance * res.value)
    if res.kind == "eta":
        return res.value / math.sqrt(n)
    return float(res.value)


def _exceeds(err, thr):
    return err >= thr if thr > 0.0 else err > 0.0


@dataclass(frozen=True)
class DeviationRecord:
    """One trial of one estimator: estimates and exceedances per delta."""

    estimator: str
    trial: int
    estimates: tuple
    abs_errors: tuple
    thresholds: tuple
    exceeded: tuple

    def __post_init__(self):
        if any(e < 0 for e in self.abs_errors):
            raise DomainError("absolute errors must be nonnegative")
        if tuple(_exceeds(e, t) for e, t in zip(self.abs_errors, self.thresholds)) != self.exceeded:
            raise DomainError("exceeded flags disagree with errors and thresholds")


def _trial_task(args):
    dist_text, est_texts, n, deltas, seed, trial, mean, thresholds = args
    dist = parse_distribution(dist_text)
    x = sample(dist, n, seed, trial).values
    out = []
    for k, text in enumerate(est_texts):
        if _depends_on_delta(parse_estimator(text)):
            ests = tuple(MinKLMeanEstimator(delta=d).estimate(x) for d in deltas)
        else:
            ests = (parse_estimator(text).estimate(x),) * len(deltas)
        errs = tuple(abs(e - mean) for e in ests)
        flags = tuple(_exceeds(e, t) for e, t in zip(errs, thresholds[k]))
        out.append(DeviationRecord(text, trial, ests, errs, thresholds[k], flags))
    return out


@dataclass(frozen=True)
class ExperimentResult:
    config: ExperimentConfig
    rows: tuple
    records: tuple

    def to_csv(self):
        return _csv(CSV_COLUMNS, self.rows)


def _fmt(v):
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _csv(columns, rows):
    buf = io.StringIO()
    buf.write(CSV_HEADER + "\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(columns)
    for row in rows:
        w.writerow([_fmt(v) for v in row])
    return buf.getvalue()


def _records(config):
    n, deltas = int(config.n), config.deltas
    mean, var = moments(config.dist)
    thresholds = tuple(
        tuple(estimator_threshold(parse_estimator(e), n, d, var) for d in deltas)
        for e in config.estimators)
    tasks = [(config.distribution, config.estimators, n, deltas, int(config.seed), t, mean,
              thresholds) for t in range(config.trials)]
    per_trial = map_trials(_trial_task, tasks, config.workers)
    recs = sorted((r for rs in per_trial for r in rs),
                  key=lambda r: (config.estimators.index(r.estimator), r.trial))
    return recs, thresholds


def run_experiment(config):
    """Run every trial and aggregate exceed rates per (estimator, delta).

    Writes the CSV to ``config.output`` when it is set (``OSError`` propagates).
    """
    if isinstance(config, str):
        config = parse_config(config)
    recs, thresholds = _records(config)
    var = moments(config.dist)[1]
    name, params = _parse_bound(config.bound_class)
    rows = []
    T = config.trials
    for k, est in enumerate(config.estimators):
        mine = [r for r in recs if r.estimator == est]
        for j, d in enumerate(config.deltas):
            hits = sum(r.exceeded[j] for r in mine)
            rate = hits / T
            se = math.sqrt(rate * (1.0 - rate) / T)
            rows.append((est, int(config.n), d, T, rate, se, thresholds[k][j],
                         config.bound_class, bound_width(name, params, config.n, d, var),
                         int(config.seed)))
    result = ExperimentResult(config, tuple(rows), tuple(recs))
    if config.output:
        with open(config.output, "w", encoding="utf-8", newline="") as fh:
            fh.write(result.to_csv())
    return result


def _nearest_rank(sorted_vals, q):
    idx = max(1, math.ceil(q * len(sorted_vals) - 1e-12))
    return float(sorted_vals[idx - 1])


def quantile_curve(config, qs):
    """CSV of nearest-rank quantiles of ``|error|`` per estimator and delta.

    The ``q``-quantile of ``T`` sorted errors is the ``ceil(q T)``-th smallest.
    """
    if isinstance(config, str):
        config = parse_config(config)
    qs = [float(q) for q in qs]
    if not qs or any(not 0.0 < q < 1.0 for q in qs):
        raise DomainError("quantile levels must lie in (0, 1)")
    recs, _ = _records(config)
    rows = []
    for est in config.estimators:
        mine = [r for r in recs if r.estimator == est]
        for j, d in enumerate(config.deltas):
            errs = np.sort([r.abs_errors[j] for r in mine])
            for q in sorted(qs):
                rows.append((est, int(config.n), d, config.trials, q,
                             _nearest_rank(errs, q), int(config.seed)))
    return _csv(QUANTILE_COLUMNS, rows)
