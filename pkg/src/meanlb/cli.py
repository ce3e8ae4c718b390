"""``meanlb`` command line.

Exit codes: 0 success, 2 configuration or argument error, 3 numerical
failure, 4 I/O error.
"""

from __future__ import annotations

import argparse
import dataclasses
import csv
import math
import re
import sys

import numpy as np

from . import bounds, divergences, fisher_min, harness, kinf
from .distributions import DiscreteDist, Gaussian, Laplace, nishiyama_triple, parse_distribution
from .estimator import MinKLMeanEstimator, baseline_estimate, dhat_L, dhat_R, parse_estimator
from .exceptions import ConfigError, DomainError, NumericalError

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_IO = 0, 2, 3, 4


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: error: {message}\n")


def _emit(out, columns, rows, fmt):
    if fmt == "csv":
        w = csv.writer(out, lineterminator="\n")
        w.writerow(columns)
        for r in rows:
            w.writerow([repr(v) if isinstance(v, float) else v for v in r])
    else:
        for r in rows:
            out.write("  ".join(f"{c}={repr(v) if isinstance(v, float) else v}"
                                for c, v in zip(columns, r)) + "\n")


def _read_sample(path):
    """Numbers from a CSV/whitespace file; ``#`` lines and non-numeric header rows are skipped."""
    with open(path, encoding="utf-8") as fh:
        text = fh.read()
    vals = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        fields = [f for f in re.split(r"[,\s]+", line) if f]
        try:
            vals.extend(float(f) for f in fields)
        except ValueError:
            if vals:
                raise ConfigError(f"non-numeric entry in {path}", lineno) from None
    if not vals:
        raise ConfigError(f"no numbers in {path}")
    return np.asarray(vals)


# --- bound --------------------------------------------------------------------

_SWEEP = re.compile(r"^delta=(?P<lo>[^:]+):(?P<hi>[^:]+):logsteps=(?P<k>\d+)$")


def _bound_params(args):
    params = {}
    for item in args.param or []:
        key, eq, val = item.partition("=")
        if not eq:
            raise ConfigError(f"parameter {item!r} is not key=value")
        params[key.strip()] = float(val)
    for key, dest in (("alpha", "alpha"), ("L", "L"), ("I", "info"), ("a", "a"), ("b", "b"),
                      ("variance", "variance")):
        if getattr(args, dest) is not None:
            params[key] = getattr(args, dest)
    return params


def cmd_bound(args, out):
    params = _bound_params(args)
    if args.sweep:
        m = _SWEEP.match(args.sweep)
        if not m:
            raise ConfigError("sweep must look like delta=LO:HI:logsteps=K")
        lo, hi, k = float(m.group("lo")), float(m.group("hi")), int(m.group("k"))
        if not (0 < lo < hi < 1 and k >= 2):
            raise ConfigError("sweep needs 0 < LO < HI < 1 and K >= 2")
        deltas = np.geomspace(lo, hi, k)
    else:
        if args.delta is None:
            raise ConfigError("--delta or --sweep is required")
        deltas = [args.delta]
    rows = []
    for d in deltas:
        r = bounds.compute_bound(bounds.BoundQuery(args.bound_class, args.n, float(d), params))
        rows.append((args.bound_class, args.n, float(d), float(r.value), r.kind, float(r.residual)))
    # sweeps are always CSV
    _emit(out, ("class", "n", "delta", "value", "kind", "residual"), rows,
          "csv" if args.sweep else args.output)


# --- div ----------------------------------------------------------------------

def cmd_div(args, out):
    P, Q = parse_distribution(args.p), parse_distribution(args.q)
    kind = args.kind
    if isinstance(P, Gaussian) and isinstance(Q, Gaussian):
        if kind == "kl":
            v = divergences.kl_gaussian(P.mu, P.sigma, Q.mu, Q.sigma)
        elif kind == "renyi" and (args.alpha is None or args.alpha == 0.5):
            v = divergences.renyi_half_gaussian(P.mu, P.sigma, Q.mu, Q.sigma)
        else:
            raise ConfigError(f"{kind} between Gaussians is only available for kl and renyi(1/2)")
    elif isinstance(P, Laplace) and isinstance(Q, Laplace):
        if kind != "kl" or P.b != Q.b:
            raise ConfigError("Laplace pairs support kl with a common scale only")
        v = divergences.kl_laplace_shift(P.mu - Q.mu, P.b)
    elif isinstance(P, DiscreteDist) and isinstance(Q, DiscreteDist):
        if kind == "kl":
            v = divergences.kl_discrete(P, Q)
        elif kind == "renyi":
            v = divergences.renyi_discrete(0.5 if args.alpha is None else args.alpha, P, Q)
        elif kind == "hellinger":
            v = divergences.hellinger_discrete(P, Q, squared=True)
        else:
            v = divergences.chernoff_discrete(P, Q)
            if isinstance(v, tuple):
                v = v[0]
    else:
        raise ConfigError("both distributions must be discrete, Gaussian or Laplace")
    val = float(v)
    res = float(getattr(v, "residual", 0.0) or 0.0)
    _emit(out, ("kind", "value", "residual"), [(kind, val, res)], args.output)


# --- kinf ---------------------------------------------------------------------

def cmd_kinf(args, out):
    x = _read_sample(args.sample)
    kinds = [(k, v) for k, v in (("at_most", args.mean_at_most), ("at_least", args.mean_at_least),
                                 ("equal", args.mean_equal)) if v is not None]
    if len(kinds) != 1:
        raise ConfigError("give exactly one of --mean-at-most, --mean-at-least, --mean-equal")
    kind, m = kinds[0]
    cons = kinf.MomentConstraints(kinf.MeanKind(kind), m, args.second_moment,
                                  kinf.Centering(args.centering))
    value, cert = kinf.kinf_dual(x, cons, tol=args.tol)
    _emit(out, ("value", "lambda1", "lambda2", "residual"),
          [(float(value), float(cert.lambda1), float(cert.lambda2), float(cert.residual))],
          args.output)


# --- estimate -----------------------------------------------------------------

def cmd_estimate(args, out):
    x = _read_sample(args.sample)
    n = args.n if args.n is not None else x.size
    if n != x.size:
        raise ConfigError(f"--n {n} does not match the {x.size} values in {args.sample}")
    est = parse_estimator(args.spec)
    if isinstance(est, MinKLMeanEstimator):
        if est.y is None:
            est.set_params(delta=args.delta)
        est.fit(x)
        c = est.location_
        gap = dhat_L(x, c, est.y_) - dhat_R(x, c, est.y_)
        lo, hi = est.bracket_
        _emit(out, ("estimate", "y", "bracket_lo", "bracket_hi", "gap_at_estimate", "iterations"),
              [(float(c), float(est.y_), float(lo), float(hi), float(gap), int(est.n_iter_))],
              args.output)
    else:
        _emit(out, ("estimate",), [(float(baseline_estimate(est, x)),)], args.output)


# --- fisher -------------------------------------------------------------------

def cmd_fisher(args, out):
    fam = args.family
    if args.sweep:
        if fam not in ("interval_mass", "huber"):
            raise ConfigError("--sweep is available for interval_mass and huber")
        rows = [(r.epsilon, r.root, r.info, r.residual) for r in fisher_min.fisher_sweep(fam)]
        _emit(out, ("eps", "root", "info", "residual"), rows, "csv")
        return
    if fam in ("interval_mass", "huber") and args.eps is None:
        raise ConfigError(f"--eps is required for {fam}")
    if fam == "interval_mass":
        r = fisher_min.solve_omega(args.eps)
        row = (fam, r.root, r.info)
    elif fam == "huber":
        r = fisher_min.solve_huber_k(args.eps)
        row = (fam, r.root, r.info)
    elif fam == "gaussian":
        row = (fam, math.nan, 1.0)
    elif fam == "bounded":
        row = (fam, math.nan, math.pi ** 2)
    else:
        row = (fam, math.nan, bounds.SEMI_BOUNDED_CONSTANT)
    _emit(out, ("family", "root", "info"), [row], args.output)


# --- simulate -----------------------------------------------------------------

def cmd_simulate(args, out):
    with open(args.config, encoding="utf-8") as fh:
        cfg = harness.parse_config(fh.read())
    overrides = {}
    if args.workers is not None:
        overrides["workers"] = args.workers
    if args.seed is not None:
        overrides["seed"] = args.seed
    if args.out is not None:
        overrides["output"] = args.out
    if overrides:
        cfg = dataclasses.replace(cfg, **overrides)
    if args.quantiles:
        out.write(harness.quantile_curve(cfg, [float(q) for q in args.quantiles.split(",")]))
        return
    result = harness.run_experiment(cfg)
    if args.output == "csv":
        out.write(result.to_csv())
    else:
        for row in result.rows:
            out.write("  ".join(f"{c}={v}" for c, v in zip(harness.CSV_COLUMNS, row)) + "\n")


# --- verify -------------------------------------------------------------------

def cmd_verify(args, out):
    rows = []
    checks = {"data-processing", "change-of-measure", "concentration"} if args.check == "all" \
        else {args.check}
    if "data-processing" in checks:
        P, F, G = nishiyama_triple(args.y)
        rep = divergences.verify_data_processing(F, G, lambda x: x > 0)
        rows.append(("data-processing", rep.holds, float(rep.kl_slack)))
    if "change-of-measure" in checks:
        P, F, G = nishiyama_triple(args.y)
        n = min(args.n, 12)
        rep = divergences.verify_change_of_measure(
            P, F, G, n, lambda xs: xs.mean(axis=1) >= 0, beta=args.beta)
        rows.append(("change-of-measure", rep.holds, float(rep.slack)))
    if "concentration" in checks:
        dist = parse_distribution(args.dist)
        rep = kinf.verify_kinf_concentration(dist, args.n, args.delta, args.trials, args.seed,
                                             workers=args.workers)
        rows.append(("concentration", rep.within_slack,
                     float(args.delta + 3 * rep.se - rep.exceed_rate)))
    _emit(out, ("check", "holds", "slack"), rows, args.output)
    if not all(r[1] for r in rows):
        raise NumericalError("an inequality check failed")


# --- entry point --------------------------------------------------------------

def build_parser():
    p = _Parser(prog="meanlb", description="Mean-estimation lower bounds and estimators.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def add(name, fn, help_):
        sp = sub.add_parser(name, help=help_)
        sp.add_argument("--output", choices=("text", "csv"), default="text")
        sp.set_defaults(fn=fn)
        return sp

    b = add("bound", cmd_bound, "deviation lower bounds")
    b.add_argument("--class", dest="bound_class", required=True, choices=sorted(bounds.BOUND_CLASSES))
    b.add_argument("--n", type=int, default=1)
    b.add_argument("--delta", type=float)
    b.add_argument("--sweep")
    b.add_argument("--alpha", type=float)
    b.add_argument("--L", dest="L", type=float)
    b.add_argument("--I", dest="info", type=float)
    b.add_argument("--a", type=float)
    b.add_argument("--b", type=float)
    b.add_argument("--variance", type=float)
    b.add_argument("--param", action="append", help="extra key=value bound parameter")

    d = add("div", cmd_div, "divergences between two distribution literals")
    d.add_argument("--kind", required=True, choices=("kl", "renyi", "hellinger", "chernoff"))
    d.add_argument("--p", required=True)
    d.add_argument("--q", required=True)
    d.add_argument("--alpha", type=float)

    k = add("kinf", cmd_kinf, "constrained KL projection of a sample")
    k.add_argument("--sample", required=True)
    k.add_argument("--mean-at-most", type=float)
    k.add_argument("--mean-at-least", type=float)
    k.add_argument("--mean-equal", type=float)
    k.add_argument("--second-moment", type=float, required=True)
    k.add_argument("--centering", choices=("about_m", "raw"), default="about_m")
    k.add_argument("--tol", type=float, default=1e-9)

    e = add("estimate", cmd_estimate, "point estimate of the mean")
    e.add_argument("--spec", default="minkl")
    e.add_argument("--sample", required=True)
    e.add_argument("--n", type=int)
    e.add_argument("--delta", type=float, default=0.1)

    f = add("fisher", cmd_fisher, "minimal Fisher information")
    f.add_argument("--family", required=True,
                   choices=("interval_mass", "huber", "gaussian", "bounded", "semibounded"))
    f.add_argument("--eps", type=float)
    f.add_argument("--sweep", action="store_true")

    s = add("simulate", cmd_simulate, "Monte Carlo deviation experiment")
    s.add_argument("--config", required=True)
    s.add_argument("--workers", type=int)
    s.add_argument("--seed", type=int)
    s.add_argument("--out", help="write the CSV to this path")
    s.add_argument("--quantiles", help="comma-separated levels; emit |error| quantiles instead")

    v = add("verify", cmd_verify, "numerical checks of the divergence inequalities")
    v.add_argument("--check", default="all",
                   choices=("all", "data-processing", "change-of-measure", "concentration"))
    v.add_argument("--y", type=float, default=0.5)
    v.add_argument("--beta", type=float, default=0.5)
    v.add_argument("--dist", default="gaussian(0,1)")
    v.add_argument("--n", type=int, default=10)
    v.add_argument("--delta", type=float, default=0.1)
    v.add_argument("--trials", type=int, default=200)
    v.add_argument("--seed", type=int, default=0)
    v.add_argument("--workers", type=int, default=1)
    return p


def main(argv=None, stdout=None):
    out = stdout if stdout is not None else sys.stdout
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        args.fn(args, out)
    except ConfigError as exc:
        print(f"meanlb: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except OSError as exc:
        print(f"meanlb: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except NumericalError as exc:
        print(f"meanlb: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (DomainError, ValueError) as exc:
        print(f"meanlb: invalid input: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
