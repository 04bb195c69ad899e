"""Command-line front end.

Exit codes: 0 success, 1 I/O or parse error, 2 invalid model or parameters,
3 numerical failure.  ``CROSSFIELD_THREADS`` sets the default thread count.
"""

import argparse
import os
import sys

import numpy as np

from . import config
from .cokrige import SCORE_COLUMNS, cokrige, cross_validate
from .crosscov import psd_check, validate_model
from .data import SpatialDesign
from .empirical import (
    LagBinning,
    cross_variogram,
    empirical_cross_cov,
    kernel_cov_matrix,
    pseudo_cross_variogram,
)
from .errors import DataError, NumericalError, ParameterError
from .estimate import FitSpec, fit_staged, staged_plan
from .gaussian import assemble_sigma, dump_binary, factorize, simulate
from .io import read_dataset, read_sites, write_dataset, write_table

EXIT_OK, EXIT_IO, EXIT_MODEL, EXIT_NUMERIC = 0, 1, 2, 3

EMPIRICAL_COLUMNS = (
    "kind", "bin", "lag_lo", "lag_hi", "lag_center", "mean_lag", "var_i", "var_j", "count", "estimate",
)
PREDICTION_COLUMNS = ("site", "rep", "variable", "mean", "variance")
KERNEL_COLUMNS = ("point_i", "var_i", "point_j", "var_j", "estimate")


def _positive_int(text):
    try:
        v = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected an integer, got {text!r}") from None
    if v < 1:
        raise argparse.ArgumentTypeError(f"must be at least 1, got {v}")
    return v


def _grid(text):
    try:
        shape = tuple(int(s) for s in text.lower().split("x"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"grid must look like 10x10, got {text!r}") from None
    if not shape or min(shape) < 1:
        raise argparse.ArgumentTypeError(f"grid sizes must be positive, got {text!r}")
    return shape


def _vector(text):
    try:
        return np.array([float(s) for s in text.split(",")])
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}") from None


def _default_threads():
    raw = os.environ.get("CROSSFIELD_THREADS", "1")
    try:
        return max(int(raw), 1)
    except ValueError:
        return 1


def _design(args):
    if args.sites:
        return read_sites(args.sites)
    if args.grid:
        return SpatialDesign.grid(args.grid, args.spacing, args.origin)
    raise ParameterError("give a design with --grid or --sites")


def _check_p(model, sample):
    if model.p != sample.p:
        raise ParameterError(
            f"model has {model.p} variables but the data have {sample.p} ({', '.join(sample.variables)})"
        )


def _echo(text):
    sys.stdout.write(text if text.endswith("\n") else text + "\n")


def cmd_simulate(args):
    model = config.load(args.config)
    design = _design(args)
    report = validate_model(model, seed=args.seed, dim=design.d)
    _echo(report.summary())
    if not report.passed:
        raise ParameterError("model failed the positive-definiteness check")
    sample = simulate(model, design, args.T, seed=args.seed)
    if args.variables:
        names = args.variables.split(",")
        if len(names) != model.p:
            raise ParameterError(f"--variables names {len(names)} columns, model has {model.p}")
        sample = type(sample)(sample.design, sample.values, tuple(names))
    if args.dump_sigma:
        dump_binary(factorize(assemble_sigma(model, design)), args.dump_sigma)
    write_dataset(args.out, sample)
    return EXIT_OK


def _fit_stages(args, model):
    budget = {"starts": args.starts, "max_evals": args.max_evals}
    if args.free is not None:
        return [FitSpec(tuple(args.free), name="free", **budget)]
    if args.plan == "fixed":
        return [FitSpec((), name="fixed")]
    if args.plan == "joint":
        names = [n for n in model.params() if not n.rsplit(".", 1)[-1].startswith(("nugget_", "nu_cross"))]
        return [FitSpec(tuple(names), name="joint", **budget)]
    return staged_plan(model, **budget)


def _fit(args, model, sample):
    stages = _fit_stages(args, model)
    res = fit_staged(stages, sample, model, seed=args.seed, threads=args.threads)
    reports = res.report["stages"]
    report = {
        "loglik": float(res.loglik),
        "seed": args.seed,
        "starts": int(sum(r.get("starts", 0) for r in reports)),
        "evaluations": int(sum(r.get("evaluations", 0) for r in reports)),
        "stages": [
            {
                "name": r.get("stage", ""),
                "free": list(r.get("free", [])),
                "starts": r.get("starts", 0),
                "evaluations": r.get("evaluations", 0),
                "best_gap": r.get("best_gap", 0.0),
                "start_logliks": [float(v) for v in r.get("start_logliks", [])],
            }
            for r in reports
        ],
    }
    return res.model, report


def cmd_fit(args):
    model = config.load(args.config)
    sample = read_dataset(args.data)
    _check_p(model, sample)
    fitted, report = _fit(args, model, sample)
    text = config.dumps(fitted, report)
    if args.out:
        config.save(fitted, args.out, report)
    _echo(text)
    return EXIT_OK


def cmd_predict(args):
    model = config.load(args.model)
    sample = read_dataset(args.data)
    _check_p(model, sample)
    targets = read_sites(args.targets)
    if targets.d != sample.design.d:
        raise ParameterError(
            f"dimension mismatch: data sites are {sample.design.d}-d, targets {targets.d}-d"
        )
    pred = cokrige(
        model, sample.design, sample.values, targets,
        observable=not args.latent, variables=sample.variables,
    )
    rows = pred.rows()
    for r in rows:
        r["rep"] = sample.rep_ids[r["rep"]]
    write_table(args.out, rows, PREDICTION_COLUMNS)
    return EXIT_OK


def cmd_validate(args):
    model = config.load(args.config)
    report = validate_model(
        model, design_sizes=tuple(args.sizes), trials=args.trials, seed=args.seed, dim=args.dim
    )
    _echo(report.summary())
    if args.dump_sigma:
        design = _design(args)
        dump_binary(factorize(assemble_sigma(model, design)), args.dump_sigma)
    return EXIT_OK if report.passed else EXIT_MODEL


def cmd_empirical(args):
    sample = read_dataset(args.data)
    if args.kernel is not None:
        if not args.points:
            raise ParameterError("--kernel needs --points")
        pts = read_sites(args.points)
        if pts.d != sample.design.d:
            raise ParameterError(
                f"dimension mismatch: data sites are {sample.design.d}-d, points {pts.d}-d"
            )
        M = kernel_cov_matrix(sample, args.kernel, pts.coords, centered=not args.raw)
        ok, min_eig, _, threshold = psd_check(M)
        _echo(
            f"kernel estimate: {M.shape[0]}x{M.shape[0]} matrix, PD check "
            f"{'passed' if ok else 'FAILED'} (min eigenvalue {min_eig:.3g}, threshold {threshold:.3g})"
        )
        p = sample.p
        rows = [
            {
                "point_i": pts.site_ids[a // p], "var_i": sample.variables[a % p],
                "point_j": pts.site_ids[b // p], "var_j": sample.variables[b % p],
                "estimate": float(M[a, b]),
            }
            for a in range(M.shape[0])
            for b in range(M.shape[0])
        ]
        write_table(args.out, rows, KERNEL_COLUMNS)
        return EXIT_OK
    max_lag = args.max_lag if args.max_lag is not None else sample.design.diameter() / 2
    binning = LagBinning.regular(max_lag, args.bins, direction=args.direction, angle_tol=args.angle_tol)
    if args.kind == "cross_cov":
        est = empirical_cross_cov(sample, binning, centered=args.raw)
    elif args.kind == "cross_variogram":
        est = cross_variogram(sample, binning)
    else:
        est = pseudo_cross_variogram(sample, binning, centered=args.raw)
    write_table(args.out, est.rows(), EMPIRICAL_COLUMNS)
    return EXIT_OK


def cmd_cv(args):
    model = config.load(args.config)
    sample = read_dataset(args.data)
    _check_p(model, sample)
    if args.refit != "none":
        args.plan, args.free = args.refit, None
        model, _ = _fit(args, model, sample)
    table = cross_validate(
        model, sample, args.fraction, args.repeats, seed=args.seed,
        name=args.name or model.family, threads=args.threads,
    )
    write_table(args.out, table.rows(), SCORE_COLUMNS)
    _echo(write_table(None, table.rows(), SCORE_COLUMNS))
    return EXIT_OK


def build_parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=0, help="random seed (default 0)")
    common.add_argument(
        "--threads", type=_positive_int, default=_default_threads(),
        help="worker threads for multi-starts and CV repeats "
        "(default $CROSSFIELD_THREADS or 1)",
    )

    design = argparse.ArgumentParser(add_help=False)
    design.add_argument("--grid", type=_grid, help="regular grid such as 10x10")
    design.add_argument("--spacing", type=float, default=1.0, help="grid spacing (default 1)")
    design.add_argument("--origin", type=float, default=0.0, help="grid origin (default 0)")
    design.add_argument("--sites", help="CSV of sites (site, x1..xd, optional t)")

    fitopts = argparse.ArgumentParser(add_help=False)
    fitopts.add_argument("--starts", type=_positive_int, default=5, help="starts per stage (default 5)")
    fitopts.add_argument(
        "--max-evals", type=_positive_int, default=2000, help="evaluations per start (default 2000)"
    )

    ap = argparse.ArgumentParser(
        prog="crossfield", description="Multivariate spatial covariance models: simulate, fit, predict."
    )
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", parents=[common, design], help="simulate a dataset from a model")
    p.add_argument("--config", required=True, help="model configuration (YAML)")
    p.add_argument("-T", "--T", dest="T", type=_positive_int, required=True, help="replications")
    p.add_argument("--variables", help="comma-separated variable names (default z1,z2,...)")
    p.add_argument("--dump-sigma", help="also write the joint covariance and its Cholesky factor")
    p.add_argument("--out", required=True, help="output dataset CSV")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("fit", parents=[common, fitopts], help="maximum-likelihood fit")
    p.add_argument("--config", required=True, help="initial model configuration (YAML)")
    p.add_argument("--data", required=True, help="dataset CSV")
    p.add_argument(
        "--plan", choices=("staged", "joint", "fixed"), default="staged",
        help="staged: marginals under independence, then cross parameters; "
        "joint: all parameters except nuggets; fixed: evaluate only",
    )
    p.add_argument(
        "--free", nargs="*", metavar="PATTERN",
        help="single stage freeing the parameters matching these glob patterns",
    )
    p.add_argument("--out", help="fitted configuration with its fit report (YAML)")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("predict", parents=[common], help="co-kriging predictions")
    p.add_argument("--model", required=True, help="model configuration (YAML)")
    p.add_argument("--data", required=True, help="dataset CSV (mean zero)")
    p.add_argument("--targets", required=True, help="CSV of target sites")
    p.add_argument("--latent", action="store_true", help="predict the process without the nugget")
    p.add_argument("--out", required=True, help="prediction CSV")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("validate", parents=[common, design], help="positive-definiteness check")
    p.add_argument("--config", required=True, help="model configuration (YAML)")
    p.add_argument("--dim", type=_positive_int, help="spatial dimension (default: model's own or 2)")
    p.add_argument("--sizes", type=_positive_int, nargs="+", default=[8, 30], help="design sizes")
    p.add_argument("--trials", type=_positive_int, default=3, help="designs per size")
    p.add_argument("--dump-sigma", help="write the joint covariance on --grid/--sites")
    p.set_defaults(func=cmd_validate)

    p = sub.add_parser("empirical", parents=[common], help="empirical cross-covariance estimates")
    p.add_argument("--data", required=True, help="dataset CSV")
    p.add_argument(
        "--kind", choices=("cross_cov", "cross_variogram", "pseudo_cross_variogram"),
        default="cross_cov", help="binned estimator (default cross_cov)",
    )
    p.add_argument("--bins", type=_positive_int, default=10, help="number of lag bins")
    p.add_argument("--max-lag", type=float, help="largest lag (default half the design diameter)")
    p.add_argument("--direction", type=_vector, help="lag direction such as 1,0")
    p.add_argument("--angle-tol", type=float, default=np.pi / 8, help="angular tolerance (radians)")
    p.add_argument(
        "--raw", action="store_true",
        help="use values as given; by default each replication is centered by its sample mean",
    )
    p.add_argument("--kernel", type=float, metavar="LAMBDA", help="kernel estimator bandwidth")
    p.add_argument("--points", help="CSV of evaluation points for --kernel")
    p.add_argument("--out", required=True, help="output CSV")
    p.set_defaults(func=cmd_empirical)

    p = sub.add_parser("cv", parents=[common, fitopts], help="hold-out co-kriging study")
    p.add_argument("--config", required=True, help="model configuration (YAML)")
    p.add_argument("--data", required=True, help="dataset CSV")
    p.add_argument("--fraction", type=float, default=0.25, help="held-out site fraction")
    p.add_argument("--repeats", type=_positive_int, default=10, help="hold-out repeats")
    p.add_argument(
        "--refit", choices=("none", "staged", "joint"), default="none",
        help="fit the model on the full data before scoring (default: use as given)",
    )
    p.add_argument("--name", help="model label in the score table")
    p.add_argument("--out", required=True, help="score table CSV")
    p.set_defaults(func=cmd_cv)
    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (DataError, OSError) as err:
        sys.stderr.write(f"crossfield: {err}\n")
        return EXIT_IO
    except NumericalError as err:
        sys.stderr.write(f"crossfield: numerical failure: {err}\n")
        return EXIT_NUMERIC
    except ParameterError as err:
        sys.stderr.write(f"crossfield: invalid model or parameters: {err}\n")
        return EXIT_MODEL


if __name__ == "__main__":
    sys.exit(main())
