"""Command-line interface: simulate, fit, path, predict and benchmark."""

from __future__ import annotations

import argparse
import csv
import logging
import secrets
import sys
from pathlib import Path

import numpy as np

from .data import SimSpec, Task, load_csv, make_raw, read_numeric_csv, write_csv
from .evaluation import (
    METHODS,
    TABLES,
    run_benchmark,
    run_noise_sweep,
    write_reports,
    write_sweep,
)
from .kernels import KernelSpec
from .losses import LossSpec
from .model import FitConfig, GridSpec, KnifeModel, knife_fit, knife_path, predict

logger = logging.getLogger("knife")


class CliError(Exception):
    """A user-facing failure reported as a single line."""


def _seed(args) -> int:
    if args.seed is None:
        args.seed = secrets.randbits(63)
        print(f"seed: {args.seed}")
    return args.seed


def _add_seed(p):
    p.add_argument("--seed", type=int, default=None,
                   help="random seed (a fresh one is generated and printed if omitted)")


def _add_model_args(p):
    p.add_argument("--data", required=True, help="training CSV with a response column")
    p.add_argument("--response", default="y", help="name of the response column")
    p.add_argument("--kernel", default="gaussian",
                   help="linear, gaussian, poly-homogeneous or poly-inhomogeneous")
    p.add_argument("--degree", type=int, default=2, help="polynomial degree")
    p.add_argument("--gamma", type=float, default=1.0, help="Gaussian kernel scale")
    p.add_argument("--loss", default="squared-error",
                   help="squared-error, squared-hinge, huber-hinge or binomial-deviance")
    p.add_argument("--huber-delta", type=float, default=0.5)
    p.add_argument("--lambda1", type=float, default=1.0)
    p.add_argument("--restarts", type=int, default=5)
    p.add_argument("--max-outer-iter", type=int, default=100)
    _add_seed(p)


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="knife", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="write a simulated dataset as CSV")
    p.add_argument("--sim", choices=("linear", "sinusoid", "orange"), required=True)
    p.add_argument("--n", type=int, default=100, help="rows (total for orange)")
    p.add_argument("--noise-features", type=int, default=6,
                   help="noise features added to the orange simulation")
    p.add_argument("--output", required=True)
    _add_seed(p)

    p = sub.add_parser("fit", help="fit KNIFE at one lambda2 and save the model")
    _add_model_args(p)
    p.add_argument("--lambda2", type=float, default=0.0)
    p.add_argument("--output", required=True, help="model JSON path")

    p = sub.add_parser("path", help="trace the feature-weight path over lambda2")
    _add_model_args(p)
    p.add_argument("--delta0", type=float, default=0.01)
    p.add_argument("--ratio", type=float, default=1.2)
    p.add_argument("--max-points", type=int, default=200)
    p.add_argument("--output", required=True, help="path CSV")

    p = sub.add_parser("predict", help="predict with a saved model")
    p.add_argument("--model", required=True)
    p.add_argument("--data", required=True,
                   help="feature CSV; a response column, if present, is ignored")
    p.add_argument("--response", default="y")
    p.add_argument("--output", required=True)

    p = sub.add_parser("benchmark", help="replicated simulation benchmark")
    p.add_argument("--sim", choices=("linear", "sinusoid", "orange"), required=True)
    p.add_argument("--methods", default=None,
                   help=f"comma-separated subset of: {', '.join(sorted(METHODS))}")
    p.add_argument("--replicates", type=int, default=50)
    p.add_argument("--n", type=int, default=100, help="training rows")
    p.add_argument("--n-valid", type=int, default=1000)
    p.add_argument("--n-test", type=int, default=1000)
    p.add_argument("--noise-features", type=int, default=6)
    p.add_argument("--sweep", type=int, default=None, metavar="MAX",
                   help="orange only: repeat for 0..MAX noise features")
    p.add_argument("--threads", type=int, default=1, help="parallel replicate workers")
    p.add_argument("--output-dir", required=True)
    _add_seed(p)
    return parser


def _kernel_loss(args):
    kernel = KernelSpec.from_name(args.kernel, degree=args.degree, gamma=args.gamma)
    loss = LossSpec.from_name(args.loss, huber_delta=args.huber_delta)
    return kernel, loss


def _load_training(args, loss):
    task = Task.CLASSIFICATION if loss.is_classification else Task.REGRESSION
    return load_csv(args.data, args.response, task)


def cmd_simulate(args):
    seed = _seed(args)
    sim = SimSpec(args.sim, n=args.n, p_noise=args.noise_features, seed=seed)
    X, y, _ = make_raw(sim, np.random.default_rng(seed))
    write_csv(args.output, X, y)
    print(f"wrote {X.shape[0]} rows x {X.shape[1]} features to {args.output}")


def cmd_fit(args):
    seed = _seed(args)
    kernel, loss = _kernel_loss(args)
    data = _load_training(args, loss)
    config = FitConfig(lambda1=args.lambda1, lambda2=args.lambda2, restarts=args.restarts,
                       max_outer_iter=args.max_outer_iter, seed=seed)
    model = knife_fit(data, kernel, loss, config)
    model.save(args.output)
    print(f"iterations: {len(model.objective_trace)}")
    print(f"final objective: {model.objective!r}")
    if model.hinge_objective is not None:
        print(f"hinge objective: {model.hinge_objective!r}")
    print("weights: " + " ".join(f"{n}={w:.4g}" for n, w in zip(data.feature_names, model.w)))


def cmd_path(args):
    seed = _seed(args)
    kernel, loss = _kernel_loss(args)
    data = _load_training(args, loss)
    grid = GridSpec(args.delta0, args.ratio, args.max_points)
    config = FitConfig(restarts=args.restarts, max_outer_iter=args.max_outer_iter)
    path = knife_path(data, kernel, loss, args.lambda1, grid, seed, config)
    path.to_csv(args.output)
    print(f"{len(path)} grid points; support empty at lambda2 = {path.terminal_lambda2!r}")


def cmd_predict(args):
    model = KnifeModel.load(args.model)
    header, values = read_numeric_csv(args.data)
    if args.response in header:
        values = np.delete(values, header.index(args.response), axis=1)
    if values.shape[1] != model.w.size:
        raise CliError(
            f"{args.data}: has {values.shape[1]} feature columns, model expects {model.w.size}"
        )
    pred = predict(model, values)
    with Path(args.output).open("w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(["prediction"])
        out.writerows([repr(float(v))] for v in pred)
    print(f"wrote {pred.size} predictions to {args.output}")


def cmd_benchmark(args):
    seed = _seed(args)
    methods = args.methods.split(",") if args.methods else list(TABLES[args.sim])
    unknown = [m for m in methods if m not in METHODS]
    if unknown:
        raise CliError(f"--methods: unknown method {unknown[0]!r}")
    out = Path(args.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    if args.sweep is not None:
        if args.sim != "orange":
            raise CliError("--sweep: only the orange simulation has noise features to sweep")
        sweep = run_noise_sweep(methods, range(args.sweep + 1), args.replicates, seed,
                                args.n, args.threads, args.n_valid, args.n_test)
        write_sweep(sweep, out / "sweep.csv")
        print(f"wrote {out / 'sweep.csv'}")
        return
    sim = SimSpec(args.sim, n=args.n, p_noise=args.noise_features)
    reports = run_benchmark(sim, methods, args.replicates, seed, args.threads,
                            args.n_valid, args.n_test)
    write_reports(reports, out / "replicates.csv", out / "aggregate.csv")
    for rep in reports:
        print(f"{rep.method:18s} test {rep.mean_test:.4f} (se {rep.se_test:.4f})  "
              f"train {rep.mean_train:.4f}  n={rep.n_replicates}")


_COMMANDS = {
    "simulate": cmd_simulate,
    "fit": cmd_fit,
    "path": cmd_path,
    "predict": cmd_predict,
    "benchmark": cmd_benchmark,
}


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        _COMMANDS[args.command](args)
    except (CliError, ValueError, OSError, RuntimeError, FloatingPointError,
            np.linalg.LinAlgError) as exc:
        msg = " ".join(str(exc).split())
        print(f"knife {args.command}: error: {msg}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
