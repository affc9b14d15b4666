"""Parameter selection, error metrics and the replicated simulation benchmark."""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Sequence

import numpy as np
from joblib import Parallel, delayed
from threadpoolctl import threadpool_limits

from .baselines import Method, baseline_kernel, fit_baseline, rfe_rank, sis_rank
from .data import Dataset, SimSpec, Task, make_raw
from .kernels import KernelFamily, KernelSpec
from .losses import LossFamily, LossSpec
from .model import GridSpec, KnifeModel, knife_path

__all__ = [
    "mse",
    "misclassification",
    "prediction_error",
    "ValidationResult",
    "validate_knife",
    "select_lambda2_validation",
    "kfold_cv",
    "MethodSpec",
    "METHODS",
    "TABLES",
    "BenchmarkReport",
    "run_benchmark",
    "run_noise_sweep",
    "write_reports",
    "write_sweep",
]

logger = logging.getLogger(__name__)

PENALTY_GRID = tuple(float(v) for v in np.logspace(-3, 3, 25))
VALIDATION_POINTS = 50


# -- metrics -------------------------------------------------------------------


def mse(y, f) -> float:
    r = np.asarray(y, dtype=float) - np.asarray(f, dtype=float)
    return float(np.mean(r * r))


def misclassification(y, f) -> float:
    """Fraction of sign mismatches; a decision value of 0 counts as +1."""
    labels = np.where(np.asarray(f, dtype=float) >= 0, 1.0, -1.0)
    return float(np.mean(labels != np.asarray(y, dtype=float)))


def prediction_error(model: KnifeModel, data: Dataset) -> float:
    """MSE or misclassification of ``model`` on an already standardized dataset."""
    f = model.decision_standardized(data.X)
    if data.task is Task.CLASSIFICATION:
        return misclassification(data.y, f)
    return mse(data.y, f)


def _argmin(errors, prefer_last: bool) -> int:
    """Index of the smallest error; ties go to the last (or first) index."""
    errors = np.asarray(errors, dtype=float)
    finite = np.isfinite(errors)
    if not finite.any():
        raise RuntimeError("every candidate failed")
    best = np.min(errors[finite])
    hits = np.flatnonzero(errors == best)
    return int(hits[-1] if prefer_last else hits[0])


# -- validation-set selection ----------------------------------------------------


@dataclass
class ValidationResult:
    lambda2: float
    index: int
    lambda2_grid: np.ndarray
    errors: np.ndarray
    model: KnifeModel


def validate_knife(train: Dataset, valid: Dataset, kernel: KernelSpec, loss: LossSpec,
                   lambda1: float = 1.0, grid=None, seed: int = 0,
                   max_points: int = VALIDATION_POINTS) -> ValidationResult:
    """Fit KNIFE along a warm-started lambda2 grid and score each point on ``valid``.

    ``grid`` is either a :class:`GridSpec` (the path rule, truncated to
    ``max_points``) or an explicit sequence of lambda2 values. Ties go to
    the larger lambda2.
    """
    if grid is None or isinstance(grid, GridSpec):
        path = knife_path(train, kernel, loss, lambda1, grid=grid, seed=seed,
                          truncate=max_points)
    else:
        lambdas = np.unique(np.asarray(grid, dtype=float))
        if lambdas.size == 0:
            raise ValueError("validation grid is empty")
        path = knife_path(train, kernel, loss, lambda1, seed=seed, lambdas=lambdas)
    models = [path.model_at(k, train) for k in range(len(path))]
    errors = np.array([prediction_error(m, valid) for m in models])
    k = _argmin(errors, prefer_last=True)
    return ValidationResult(float(path.lambda2_grid[k]), k, path.lambda2_grid, errors,
                            models[k])


def select_lambda2_validation(train: Dataset, valid: Dataset, kernel: KernelSpec,
                              loss: LossSpec, lambda1: float = 1.0, grid=None,
                              seed: int = 0) -> float:
    """The lambda2 with the smallest validation error (ties: larger lambda2)."""
    return validate_knife(train, valid, kernel, loss, lambda1, grid, seed).lambda2


def kfold_cv(data: Dataset, k: int, fit_fn: Callable[[Dataset, float], KnifeModel],
             param_grid: Sequence[float], seed: int = 0, prefer: str = "larger"):
    """Choose a parameter by ``k``-fold cross-validation.

    Folds come from one seeded permutation of the rows. ``fit_fn(train,
    param)`` must return a model with ``decision_standardized``. Ties in mean
    held-out error go to the ``larger`` (default) or ``smaller`` parameter.
    A fold holding a single class is scored as it is.
    Returns ``(best_param, params, mean_errors)``.
    """
    if k < 2 or k > data.n:
        raise ValueError(f"need 2 <= k <= n, got k={k} with n={data.n}")
    if prefer not in ("larger", "smaller"):
        raise ValueError("prefer must be 'larger' or 'smaller'")
    params = np.unique(np.asarray(param_grid, dtype=float))
    if params.size == 0:
        raise ValueError("parameter grid is empty")
    perm = np.random.default_rng(seed).permutation(data.n)
    folds = [np.sort(perm[i::k]) for i in range(k)]
    totals = np.zeros(params.size)
    for held in folds:
        keep = np.setdiff1d(np.arange(data.n), held)
        train, test = data.subset(keep), data.subset(held)
        for i, param in enumerate(params):
            totals[i] += prediction_error(fit_fn(train, float(param)), test)
    means = totals / k
    best = _argmin(means, prefer_last=(prefer == "larger"))
    return float(params[best]), params, means


# -- methods ---------------------------------------------------------------------


@dataclass(frozen=True)
class MethodSpec:
    """A benchmark method and the one parameter it validates.

    ``kind`` is ``knife``, ``ridge``, ``kernel-ridge``, ``svm``, ``sis`` or
    ``rfe``; the screening kinds wrap ``inner`` (``kernel-ridge`` or ``svm``)
    at penalty 1 and validate the number of kept features. ``gamma=None``
    means ``1 / (number of features used)``.
    """

    name: str
    kind: str
    family: KernelFamily = KernelFamily.LINEAR
    degree: int = 2
    gamma: float | None = None
    inner: str | None = None


METHODS = {
    m.name: m
    for m in [
        MethodSpec("ridge", "ridge"),
        MethodSpec("kernel-ridge", "kernel-ridge", KernelFamily.GAUSSIAN),
        MethodSpec("sis-kernel-ridge", "sis", KernelFamily.GAUSSIAN, inner="kernel-ridge"),
        MethodSpec("rfe-kernel-ridge", "rfe", KernelFamily.GAUSSIAN, inner="kernel-ridge"),
        MethodSpec("svm", "svm", KernelFamily.POLY_INHOMOGENEOUS),
        MethodSpec("sis-svm", "sis", KernelFamily.POLY_INHOMOGENEOUS, inner="svm"),
        MethodSpec("rfe-svm", "rfe", KernelFamily.POLY_INHOMOGENEOUS, inner="svm"),
        MethodSpec("knife-linear", "knife", KernelFamily.LINEAR),
        MethodSpec("knife-radial", "knife", KernelFamily.GAUSSIAN, gamma=1.0),
        MethodSpec("knife-poly2", "knife", KernelFamily.POLY_INHOMOGENEOUS),
    ]
}

TABLES = {
    "linear": ("knife-linear", "ridge"),
    "sinusoid": ("ridge", "kernel-ridge", "sis-kernel-ridge", "rfe-kernel-ridge",
                 "knife-radial", "knife-poly2"),
    "orange": ("svm", "sis-svm", "rfe-svm", "knife-poly2"),
}


def _kernel(spec: MethodSpec, n_features: int) -> KernelSpec:
    if spec.gamma is None:
        return baseline_kernel(spec.family, n_features, spec.degree)
    return KernelSpec(spec.family, degree=spec.degree, gamma=spec.gamma)


def _knife_loss(task: Task) -> LossSpec:
    if task is Task.CLASSIFICATION:
        return LossSpec(LossFamily.SQUARED_HINGE)
    return LossSpec(LossFamily.SQUARED_ERROR)


def _penalized_choice(train, valid, method, kernel, features=None):
    """Validate the penalty of a baseline, warm-starting from large to small."""
    models, errors, warm = [], [], None
    for lam in sorted(PENALTY_GRID, reverse=True):
        m = fit_baseline(train, method, lam, kernel, features, warm=warm)
        warm = (m.alpha, m.alpha0)
        models.append(m)
        errors.append(prediction_error(m, valid))
    # grid runs from large to small penalty, so the first tie is the larger one
    k = _argmin(errors, prefer_last=False)
    return models[k], models[k].lambda1


def _screened_choice(train, valid, spec: MethodSpec, ranking):
    models, errors = [], []
    for k in range(1, train.p + 1):
        m = fit_baseline(train, spec.inner, 1.0, _kernel(spec, k), ranking.top(k))
        models.append(m)
        errors.append(prediction_error(m, valid))
    # ties go to fewer features
    k = _argmin(errors, prefer_last=False)
    return models[k], float(k + 1)


def fit_method(spec: MethodSpec, train: Dataset, valid: Dataset, seed: int = 0):
    """Fit ``spec`` on ``train`` with its parameter chosen on ``valid``.

    Returns ``(model, chosen_param)``.
    """
    if spec.kind == "knife":
        res = validate_knife(train, valid, _kernel(spec, train.p), _knife_loss(train.task),
                             1.0, seed=seed)
        return res.model, res.lambda2
    if spec.kind == "ridge":
        return _penalized_choice(train, valid, Method.RIDGE, None)
    if spec.kind in ("kernel-ridge", "svm"):
        return _penalized_choice(train, valid, Method(spec.kind), _kernel(spec, train.p))
    if spec.kind == "sis":
        return _screened_choice(train, valid, spec, sis_rank(train))
    if spec.kind == "rfe":
        ranking = rfe_rank(train, _kernel(spec, train.p), lambda1=1.0)
        return _screened_choice(train, valid, spec, ranking)
    raise ValueError(f"unknown method kind {spec.kind!r}")


# -- benchmark -------------------------------------------------------------------


@dataclass
class BenchmarkReport:
    method: str
    train_errors: np.ndarray
    test_errors: np.ndarray
    chosen_params: np.ndarray
    failures: int = 0
    settings: dict = field(default_factory=dict)

    @property
    def ok(self) -> np.ndarray:
        return np.isfinite(self.test_errors) & np.isfinite(self.train_errors)

    @property
    def n_replicates(self) -> int:
        return int(self.ok.sum())

    def _mean(self, values) -> float:
        v = values[self.ok]
        return float(math.fsum(v) / v.size) if v.size else math.nan

    def _se(self, values) -> float:
        v = values[self.ok]
        if v.size < 2:
            return math.nan
        return float(np.std(v, ddof=1) / math.sqrt(v.size))

    @property
    def mean_train(self) -> float:
        return self._mean(self.train_errors)

    @property
    def mean_test(self) -> float:
        return self._mean(self.test_errors)

    @property
    def se_train(self) -> float:
        return self._se(self.train_errors)

    @property
    def se_test(self) -> float:
        return self._se(self.test_errors)


def _one_replicate(sim: SimSpec, methods, child: np.random.SeedSequence, sizes):
    with threadpool_limits(limits=1):
        streams = child.spawn(4)
        parts = []
        for stream, n in zip(streams[:3], sizes):
            X, y, task = make_raw(sim, np.random.default_rng(stream), n)
            parts.append((X, y, task))
        train = Dataset.from_raw(parts[0][0], parts[0][1], parts[0][2])
        valid = Dataset.from_raw(parts[1][0], parts[1][1], parts[1][2], stats=train.stats)
        test = Dataset.from_raw(parts[2][0], parts[2][1], parts[2][2], stats=train.stats)
        fit_seed = int(streams[3].generate_state(1)[0])
        rows = []
        for name in methods:
            try:
                model, param = fit_method(METHODS[name], train, valid, seed=fit_seed)
                rows.append((prediction_error(model, train), prediction_error(model, test),
                             float(param)))
            except Exception as exc:  # recorded per replicate, reported as a failure
                logger.warning("method %s failed: %s", name, exc)
                rows.append((math.nan, math.nan, math.nan))
        return rows


def run_benchmark(sim: SimSpec, methods=None, replicates: int = 50, seed: int = 0,
                  n_jobs: int = 1, n_valid: int = 1000, n_test: int = 1000):
    """Replicated train/validate/test comparison of ``methods`` on ``sim``.

    Replicate ``r`` draws its training, validation and test sets and its
    fitting seed from child ``r`` of ``SeedSequence(seed)``, so results do
    not depend on ``n_jobs``. ``sim.n`` is the training size; for the orange
    simulation all sizes are total row counts. Returns one
    :class:`BenchmarkReport` per method.
    """
    methods = list(methods or TABLES[sim.name])
    unknown = [m for m in methods if m not in METHODS]
    if unknown:
        raise ValueError(f"unknown methods {unknown}; choose from {sorted(METHODS)}")
    if replicates < 1:
        raise ValueError("replicates must be positive")
    children = np.random.SeedSequence(seed).spawn(replicates)
    sizes = (sim.n, n_valid, n_test)
    if n_jobs == 1:
        results = [_one_replicate(sim, methods, c, sizes) for c in children]
    else:
        results = Parallel(n_jobs=n_jobs)(
            delayed(_one_replicate)(sim, methods, c, sizes) for c in children
        )
    reports = []
    for i, name in enumerate(methods):
        arr = np.array([r[i] for r in results], dtype=float)
        failures = int(np.sum(~np.isfinite(arr[:, 1])))
        if failures:
            logger.warning("%s failed on %d of %d replicates", name, failures, replicates)
        reports.append(BenchmarkReport(name, arr[:, 0], arr[:, 1], arr[:, 2], failures,
                                       {"simulation": sim.name, "p_noise": sim.p_noise,
                                        "seed": seed}))
    return reports


def run_noise_sweep(methods=("svm", "knife-poly2"), noise_counts=range(11),
                    replicates: int = 10, seed: int = 0, n: int = 100, n_jobs: int = 1,
                    n_valid: int = 1000, n_test: int = 1000):
    """Orange-simulation benchmark for each number of added noise features.

    Returns ``{noise_count: [BenchmarkReport, ...]}``; each count uses its
    own seed stream derived from ``(seed, noise_count)``.
    """
    out = {}
    for q in noise_counts:
        sub_seed = int(np.random.SeedSequence([seed, int(q)]).generate_state(1)[0])
        out[int(q)] = run_benchmark(SimSpec("orange", n=n, p_noise=int(q)), methods,
                                    replicates, sub_seed, n_jobs, n_valid, n_test)
    return out


# -- report files ----------------------------------------------------------------


def _fmt(v: float) -> str:
    return repr(float(v))


def write_reports(reports, per_replicate_path, aggregate_path):
    """Write the per-replicate and aggregate CSV files."""
    with Path(per_replicate_path).open("w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(["method", "replicate", "train_error", "test_error", "chosen_param"])
        for rep in reports:
            for r in range(rep.test_errors.size):
                out.writerow([rep.method, r, _fmt(rep.train_errors[r]),
                              _fmt(rep.test_errors[r]), _fmt(rep.chosen_params[r])])
    with Path(aggregate_path).open("w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(["method", "mean_train", "se_train", "mean_test", "se_test",
                      "n_replicates", "n_failed"])
        for rep in reports:
            out.writerow([rep.method, _fmt(rep.mean_train), _fmt(rep.se_train),
                          _fmt(rep.mean_test), _fmt(rep.se_test), rep.n_replicates,
                          rep.failures])


def write_sweep(sweep: dict, path):
    """One aggregate row per (noise count, method), ready for plotting."""
    with Path(path).open("w", newline="") as fh:
        out = csv.writer(fh, lineterminator="\n")
        out.writerow(["noise_features", "method", "mean_train", "se_train", "mean_test",
                      "se_test", "n_replicates", "n_failed"])
        for q in sorted(sweep):
            for rep in sweep[q]:
                out.writerow([q, rep.method, _fmt(rep.mean_train), _fmt(rep.se_train),
                              _fmt(rep.mean_test), _fmt(rep.se_test), rep.n_replicates,
                              rep.failures])
