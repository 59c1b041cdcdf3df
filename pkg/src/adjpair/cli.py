"""Command-line front end.

Subcommands: ``fit``, ``profile``, ``gof``, ``simulate``, ``range`` and
``reproduce``.  Data go to standard output, diagnostics to standard error.
Exit codes: 0 success, 2 usage or configuration error, 3 numerical failure,
4 reproduction target missed.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys

import numpy as np

from . import datasets as ds
from . import gof
from . import inference as inf
from .adjustments import AdjustmentSpec
from .bivariate import BivariateModel, alpha_range, corr_range, exact_alpha_range
from .errors import AdjPairError, ConvergenceError
from .marginals import MarginalSpec

EXIT_OK, EXIT_USAGE, EXIT_NUMERIC, EXIT_MISS = 0, 2, 3, 4

MODELS = ("poisson3", "poisson4", "poisson_limit", "independent", "binomial2", "auditc3")


class UsageError(AdjPairError, ValueError):
    pass


# Data and likelihood construction -------------------------------------------

def load_data(source, schema=None):
    if source in ds.BUILTIN_NAMES:
        return ds.builtin(source)
    if schema is None:
        raise UsageError(f"{source!r} is not a builtin dataset; pass --schema for CSV input")
    return ds.load_csv(source, schema)


def _int_list(text):
    if text is None:
        return None
    try:
        vals = [int(v) for v in str(text).split(",")]
    except ValueError:
        raise UsageError(f"threshold list {text!r} must be comma-separated integers") from None
    return vals


def build_likelihood(args, data):
    model = args.model or ("auditc3" if isinstance(data, ds.Studies) else "poisson3")
    censor = 5 if getattr(args, "censored_tail", False) else None
    admiss = getattr(args, "admissibility", "exact")
    if model == "auditc3":
        return inf.AuditC3Likelihood(data, _int_list(args.x0), _int_list(args.y0), admiss)
    if isinstance(data, ds.Studies):
        raise UsageError(f"model {model} needs pair data, not study rows")
    if model == "binomial2":
        if isinstance(data, ds.CountTable):
            data = data.to_pairs()
        x0 = _int_list(args.x0)
        y0 = _int_list(args.y0)
        return inf.Binomial2Likelihood(data, args.trials, x0[0] if x0 else None, y0[0] if y0 else None, admiss)
    if model == "poisson3":
        return inf.Poisson3Likelihood(data, t=args.t, censor_at=censor, admissibility=admiss)
    if model == "poisson4":
        return inf.Poisson4Likelihood(data, censor_at=censor, admissibility=admiss)
    if model == "poisson_limit":
        return inf.PoissonLimitLikelihood(data, censor_at=censor, admissibility=admiss)
    if model == "independent":
        return inf.IndependentPoissonLikelihood(data, censor_at=censor)
    raise UsageError(f"unknown model {model!r}")


# Output helpers --------------------------------------------------------------

def _emit(text):
    sys.stdout.write(text if text.endswith("\n") else text + "\n")


def _json(obj):
    return json.dumps(obj, indent=2, allow_nan=False)


def _fit_csv(result):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(("parameter", "estimate", "se"))
    for name, est, se in zip(result.names, result.estimates, result.se):
        w.writerow((name, repr(float(est)), repr(float(se))))
    w.writerow(("loglik_max", repr(float(result.loglik_max)), ""))
    return buf.getvalue()


def _curve_csv(curve):
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow((curve.param_name, "deviance", "cc", "failed"))
    for g, d, c, f in zip(curve.grid, curve.deviance, curve.cc, curve.failed):
        w.writerow((repr(float(g)), repr(float(d)), repr(float(c)), int(f)))
    return buf.getvalue()


def _interval_json(lo, hi):
    return [None if not math.isfinite(lo) else lo, None if not math.isfinite(hi) else hi]


# Subcommands -------------------------------------------------------------------

def cmd_fit(args):
    data = load_data(args.data, args.schema)
    lik = build_likelihood(args, data)
    result = inf.fit(lik, seed=args.seed)
    if not result.converged:
        print(f"warning: {lik.name} fit did not meet the convergence criterion", file=sys.stderr)
    _emit(_json(result.to_dict()) if args.format == "json" else _fit_csv(result))
    return EXIT_OK


def cmd_profile(args):
    if not args.lo < args.hi:
        raise UsageError("--lo must be below --hi")
    if args.points < 3:
        raise UsageError("--points must be at least 3")
    for level in args.level:
        if not 0 < level < 1:
            raise UsageError("levels must lie in (0, 1)")
    data = load_data(args.data, args.schema)
    lik = build_likelihood(args, data)
    fitted = inf.fit(lik, seed=args.seed)
    grid = np.linspace(args.lo, args.hi, args.points)
    opts = {"warm_start": not args.no_warm_start, "workers": args.workers}
    if args.param == "rho":
        curve, _ = inf.profile_correlation(lik, fitted, grid, **opts)
    else:
        if args.param not in lik.names:
            raise UsageError(f"{lik.name} has no parameter {args.param!r}; choose from {', '.join(lik.names)}")
        curve = inf.profile(lik, fitted, args.param, grid, **opts)
    intervals = {f"{lv:g}": curve.interval(lv) for lv in args.level}
    if args.plot:
        from . import plotting

        plotting.plot_confidence_curve(curve, args.plot, levels=tuple(args.level))
        print(f"wrote {args.plot}", file=sys.stderr)
    if args.format == "json":
        out = curve.to_dict()
        out["intervals"] = {k: _interval_json(*v) for k, v in intervals.items()}
        _emit(_json(out))
    else:
        _emit(_curve_csv(curve))
        for k, (lo, hi) in intervals.items():
            print(f"level {k}: [{lo:.6g}, {hi:.6g}]", file=sys.stderr)
    if np.any(curve.failed):
        print(f"warning: {int(curve.failed.sum())} grid point(s) failed to optimise", file=sys.stderr)
    return EXIT_OK


def _gof_model(args, data):
    adj = AdjustmentSpec.exp_decay(args.t)
    if args.theta1 is not None or args.theta2 is not None:
        if args.theta1 is None or args.theta2 is None:
            raise UsageError("give both --theta1 and --theta2")
        alpha = 0.0 if args.model == "independent" else args.alpha
        return BivariateModel(MarginalSpec.poisson(args.theta1), MarginalSpec.poisson(args.theta2),
                              adj, adj, alpha, "exact")
    lik = (inf.IndependentPoissonLikelihood(data) if args.model == "independent"
           else inf.Poisson3Likelihood(data, t=args.t))
    return lik.model(inf.fit(lik, seed=args.seed).estimates)


def cmd_gof(args):
    data = load_data(args.data, args.schema)
    if isinstance(data, ds.PairSample):
        data = data.tabulate(args.cap)
    if not isinstance(data, ds.CountTable):
        raise UsageError("gof needs a count table or pair data")
    if args.model not in ("independent", "poisson3"):
        raise UsageError("gof supports --model independent or poisson3")
    model = _gof_model(args, data)
    report = gof.pearson(data, gof.expected_table(model, data.n, data.shape))
    if args.format == "json":
        out = report.to_dict()
        out["parameters"] = {"theta1": model.m1.params[0], "theta2": model.m2.params[0], "alpha": model.alpha}
        _emit(_json(out))
    else:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(("row", "col", "observed", "expected", "residual"))
        for (i, j), e in np.ndenumerate(report.expected):
            w.writerow((i, j, int(data.counts[i, j]), f"{e:.6f}", f"{report.residuals[i, j]:.6f}"))
        _emit(buf.getvalue())
        print(f"K = {report.K:.4f}; max |P| = {report.max_abs_residual:.4f}", file=sys.stderr)
    return EXIT_OK


def _simulation_model(args):
    if args.model == "binomial2":
        m = MarginalSpec.binomial(args.trials, args.p)
        x0 = args.x0 if args.x0 is not None else int(math.floor(args.trials * args.p + 0.5))
        y0 = args.y0 if args.y0 is not None else x0
        return BivariateModel(m, m, AdjustmentSpec.indicator(int(x0)), AdjustmentSpec.indicator(int(y0)), args.alpha)
    if args.model == "poisson3":
        adj = AdjustmentSpec.exp_decay(args.t)
        return BivariateModel(MarginalSpec.poisson(args.theta1), MarginalSpec.poisson(args.theta2), adj, adj, args.alpha)
    if args.model == "poisson_limit":
        adj = AdjustmentSpec.limit_brutal()
        return BivariateModel(MarginalSpec.poisson(args.theta1), MarginalSpec.poisson(args.theta2), adj, adj, args.alpha)
    raise UsageError("simulate supports --model binomial2, poisson3 or poisson_limit")


def cmd_simulate(args):
    if args.n < 1:
        raise UsageError("--n must be at least 1")
    model = _simulation_model(args)
    pairs = model.sample(args.n, args.seed)
    text = ds.dumps_csv(ds.PairSample(pairs[:, 0], pairs[:, 1]))
    if args.out:
        with open(args.out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    else:
        sys.stdout.write(text)
    return EXIT_OK


def _range_parts(args):
    fam = args.family
    if fam == "poisson":
        adj = AdjustmentSpec.limit_brutal() if args.t == math.inf else AdjustmentSpec.exp_decay(args.t)
        return MarginalSpec.poisson(args.theta1), MarginalSpec.poisson(args.theta2), adj, adj
    if fam == "exponential":
        adj = AdjustmentSpec.exp_decay(args.t)
        return MarginalSpec.exponential(args.theta1), MarginalSpec.exponential(args.theta2), adj, adj
    if fam == "binomial":
        m1 = MarginalSpec.binomial(args.trials, args.p1)
        m2 = MarginalSpec.binomial(args.trials, args.p2)
        x0 = args.x0 if args.x0 is not None else int(math.floor(args.trials * args.p1 + 0.5))
        y0 = args.y0 if args.y0 is not None else int(math.floor(args.trials * args.p2 + 0.5))
        return m1, m2, AdjustmentSpec.indicator(x0), AdjustmentSpec.indicator(y0)
    if fam == "binomial-linear":
        m1 = MarginalSpec.binomial(args.trials, args.p1)
        m2 = MarginalSpec.binomial(args.trials, args.p2)
        return m1, m2, AdjustmentSpec.linear(), AdjustmentSpec.linear()
    z = MarginalSpec.normal()
    if fam == "normal-phi":
        return z, z, AdjustmentSpec.phi_kernel(), AdjustmentSpec.phi_kernel()
    if fam == "normal-quadrant":
        return z, z, AdjustmentSpec.quadrant(), AdjustmentSpec.quadrant()
    if fam == "normal-expquad":
        adj = AdjustmentSpec.exp_quadratic(args.s, args.t)
        return z, z, adj, adj
    raise UsageError(f"unknown family {fam!r}")


def cmd_range(args):
    m1, m2, a1, a2 = _range_parts(args)
    lo, hi = alpha_range(m1, m2, a1, a2)
    elo, ehi = exact_alpha_range(m1, m2, a1, a2)
    cr = corr_range(m1, m2, a1, a2)
    out = {
        "marginals": [str(m1), str(m2)],
        "adjustments": [str(a1), str(a2)],
        "alpha_range": [lo, hi],
        "exact_alpha_range": _interval_json(elo, ehi),
        "corr_range": [cr.lo, cr.hi],
    }
    if args.format == "json":
        _emit(_json(out))
    else:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(("quantity", "lo", "hi"))
        w.writerow(("alpha_range", repr(lo), repr(hi)))
        w.writerow(("exact_alpha_range", repr(elo), repr(ehi)))
        w.writerow(("corr_range", repr(cr.lo), repr(cr.hi)))
        _emit(buf.getvalue())
    return EXIT_OK


def cmd_reproduce(args):
    from . import reproduce

    report = reproduce.run(censored_tail=args.censored_tail)
    if args.outdir:
        for path in reproduce.write_artifacts(report, args.outdir):
            print(f"wrote {path}", file=sys.stderr)
    if args.json:
        _emit(_json(report.to_dict()))
    else:
        _emit(report.format_table())
    if not report.passed:
        names = ", ".join(r.name for r in report.failures)
        print(f"reproduction targets missed: {names}", file=sys.stderr)
        return EXIT_MISS
    return EXIT_OK


# Parser --------------------------------------------------------------------------

def _add_data_args(p, models=MODELS):
    p.add_argument("--data", required=True, help="builtin name (%s) or CSV path" % ", ".join(ds.BUILTIN_NAMES))
    p.add_argument("--schema", choices=("pairs", "table", "studies"), help="CSV schema for file input")
    p.add_argument("--model", choices=models, help="likelihood family (default depends on the data)")
    p.add_argument("--t", type=float, default=1.0, help="fixed tuning value of exp(-t x)")
    p.add_argument("--x0", help="threshold(s); comma-separated per study for auditc3")
    p.add_argument("--y0", help="threshold(s); comma-separated per study for auditc3")
    p.add_argument("--trials", type=int, default=100, help="binomial trials for binomial2")
    p.add_argument("--censored-tail", action="store_true", help='read the top cell as "5 or more"')
    p.add_argument("--admissibility", choices=("exact", "bound"), default="exact")
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.add_argument("--seed", type=int, default=0, help="seed for optimiser restarts")


def build_parser():
    parser = argparse.ArgumentParser(prog="adjpair", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", help="maximum-likelihood fit")
    _add_data_args(p)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("profile", help="profile confidence curve")
    _add_data_args(p)
    p.add_argument("--param", default="alpha", help="parameter to profile, or 'rho' for the correlation")
    p.add_argument("--lo", type=float, required=True)
    p.add_argument("--hi", type=float, required=True)
    p.add_argument("--points", type=int, default=101)
    p.add_argument("--level", type=float, action="append", help="confidence level (repeatable)")
    p.add_argument("--plot", help="write the curve to this SVG/PNG path")
    p.add_argument("--no-warm-start", action="store_true", help="start every grid point at the estimate")
    p.add_argument("--workers", type=int, default=None, help="processes for --no-warm-start")
    p.set_defaults(func=cmd_profile)

    p = sub.add_parser("gof", help="expected table and Pearson residuals")
    p.add_argument("--data", required=True)
    p.add_argument("--schema", choices=("pairs", "table"))
    p.add_argument("--model", choices=("independent", "poisson3"), default="poisson3")
    p.add_argument("--t", type=float, default=1.0)
    p.add_argument("--theta1", type=float, help="evaluate at these rates instead of fitting")
    p.add_argument("--theta2", type=float)
    p.add_argument("--alpha", type=float, default=0.0)
    p.add_argument("--cap", type=int, default=5, help="pooling cap when tabulating pair data")
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_gof)

    p = sub.add_parser("simulate", help="draw pairs from a model")
    p.add_argument("--model", choices=("binomial2", "poisson3", "poisson_limit"), default="binomial2")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--alpha", type=float, required=True)
    p.add_argument("--seed", type=int, required=True)
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--p", type=float, default=0.66)
    p.add_argument("--x0", type=int)
    p.add_argument("--y0", type=int)
    p.add_argument("--theta1", type=float, default=1.0)
    p.add_argument("--theta2", type=float, default=1.0)
    p.add_argument("--t", type=float, default=1.0)
    p.add_argument("--out", help="write CSV here instead of standard output")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("range", help="admissible dependence and correlation ranges")
    p.add_argument("--family", required=True,
                   choices=("poisson", "exponential", "binomial", "binomial-linear",
                            "normal-phi", "normal-quadrant", "normal-expquad"))
    p.add_argument("--theta1", type=float, default=1.0)
    p.add_argument("--theta2", type=float, default=1.0)
    p.add_argument("--t", type=float, default=1.0)
    p.add_argument("--s", type=float, default=1.0)
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--p1", type=float, default=0.5)
    p.add_argument("--p2", type=float, default=0.5)
    p.add_argument("--x0", type=int)
    p.add_argument("--y0", type=int)
    p.add_argument("--format", choices=("json", "csv"), default="json")
    p.set_defaults(func=cmd_range)

    p = sub.add_parser("reproduce", help="run every reproduction check")
    p.add_argument("--censored-tail", action="store_true", help="add the censored-tail sensitivity rows")
    p.add_argument("--json", action="store_true", help="machine-readable report")
    p.add_argument("--outdir", help="write report, curve CSVs and figures here")
    p.set_defaults(func=cmd_reproduce)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "level", "unset") is None:
        args.level = [0.90, 0.95]
    try:
        return args.func(args)
    except ConvergenceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (AdjPairError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (ArithmeticError, np.linalg.LinAlgError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
