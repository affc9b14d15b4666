"""KNIFE fitting: the alternating solver, restarts, prediction and weight paths."""

from __future__ import annotations

import csv
import json
import logging
import math
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .data import Dataset, Task
from .kernels import KernelCache, KernelSpec, kernel_cross_matrix, kernel_matrix
from .losses import LossFamily, LossSpec, loss_value
from .optim import SolverOptions, fit_coefficients, fit_weights

__all__ = [
    "FitConfig",
    "GridSpec",
    "KnifeModel",
    "PathResult",
    "objective",
    "knife_fit",
    "knife_path",
    "predict",
    "alternate",
]

logger = logging.getLogger(__name__)

# halvings of the weight step tried before keeping the previous weights
_MAX_STEP_HALVINGS = 40


@dataclass(frozen=True)
class FitConfig:
    lambda1: float = 1.0
    lambda2: float = 0.0
    max_outer_iter: int = 100
    outer_tol: float = 1e-6
    restarts: int = 5
    seed: int = 0
    init_low: float = 0.1
    init_high: float = 0.9
    solver: SolverOptions = field(default_factory=SolverOptions)

    def __post_init__(self):
        if self.lambda1 < 0 or self.lambda2 < 0:
            raise ValueError("lambda1 and lambda2 must be non-negative")
        if self.max_outer_iter < 1 or self.restarts < 1:
            raise ValueError("max_outer_iter and restarts must be positive")
        if not self.outer_tol > 0:
            raise ValueError("outer_tol must be positive")
        if not 0 < self.init_low < self.init_high < 1:
            raise ValueError("need 0 < init_low < init_high < 1")


@dataclass(frozen=True)
class GridSpec:
    """lambda2 grid rule: ``next = max(current + delta0, current * ratio)``."""

    delta0: float = 0.01
    ratio: float = 1.2
    max_points: int = 200

    def __post_init__(self):
        if not (self.delta0 > 0 and self.ratio >= 1 and self.max_points >= 2):
            raise ValueError("need delta0 > 0, ratio >= 1 and max_points >= 2")

    def next(self, lam: float) -> float:
        return max(lam + self.delta0, lam * self.ratio)


@dataclass
class KnifeModel:
    alpha: np.ndarray
    alpha0: float
    w: np.ndarray
    kernel: KernelSpec
    loss: LossSpec
    lambda1: float
    lambda2: float
    objective_trace: list
    means: np.ndarray
    scales: np.ndarray
    X_train: np.ndarray
    task: Task = Task.REGRESSION
    hinge_objective: float | None = None
    y_offset: float = 0.0

    def __post_init__(self):
        self.task = Task(self.task)

    @property
    def objective(self) -> float:
        return self.objective_trace[-1]

    @property
    def support(self) -> np.ndarray:
        return np.flatnonzero(self.w > 0)

    def decision_function(self, X_raw) -> np.ndarray:
        X_raw = np.asarray(X_raw, dtype=float)
        if X_raw.ndim != 2 or X_raw.shape[1] != self.w.shape[0]:
            raise ValueError(
                f"expected {self.w.shape[0]} feature columns, got array of shape {X_raw.shape}"
            )
        return self.decision_standardized((X_raw - self.means) / self.scales)

    def decision_standardized(self, X) -> np.ndarray:
        Kc = kernel_cross_matrix(self.kernel, self.w, self.X_train, X)
        return self.y_offset + self.alpha0 + Kc @ self.alpha

    def predict(self, X_raw) -> np.ndarray:
        return predict(self, X_raw)

    # -- serialization ---------------------------------------------------------

    def to_dict(self) -> dict:
        return {
            "format": "knife-model",
            "task": self.task.value,
            "kernel": self.kernel.to_dict(),
            "loss": self.loss.to_dict(),
            "lambda1": self.lambda1,
            "lambda2": self.lambda2,
            "alpha": self.alpha.tolist(),
            "alpha0": self.alpha0,
            "w": self.w.tolist(),
            "standardization": {"means": self.means.tolist(), "scales": self.scales.tolist()},
            "objective_trace": list(self.objective_trace),
            "hinge_objective": self.hinge_objective,
            "y_offset": self.y_offset,
            "x_train": self.X_train.tolist(),
        }

    @classmethod
    def from_dict(cls, d: dict) -> "KnifeModel":
        missing = [k for k in ("kernel", "loss", "alpha", "w", "standardization", "x_train")
                   if k not in d]
        if missing:
            raise ValueError(f"model document is missing fields: {', '.join(missing)}")
        X_train = np.asarray(d["x_train"], dtype=float)
        alpha = np.asarray(d["alpha"], dtype=float)
        w = np.asarray(d["w"], dtype=float)
        if X_train.ndim != 2 or X_train.shape != (alpha.size, w.size):
            raise ValueError("model document has inconsistent alpha / w / x_train sizes")
        return cls(
            alpha=alpha,
            alpha0=float(d.get("alpha0", 0.0)),
            w=w,
            kernel=KernelSpec.from_dict(d["kernel"]),
            loss=LossSpec.from_dict(d["loss"]),
            lambda1=float(d["lambda1"]),
            lambda2=float(d["lambda2"]),
            objective_trace=[float(v) for v in d.get("objective_trace", [])],
            means=np.asarray(d["standardization"]["means"], dtype=float),
            scales=np.asarray(d["standardization"]["scales"], dtype=float),
            X_train=X_train,
            task=Task(d.get("task", "regression")),
            hinge_objective=d.get("hinge_objective"),
            y_offset=float(d.get("y_offset", 0.0)),
        )

    def save(self, path):
        Path(path).write_text(json.dumps(self.to_dict(), indent=1) + "\n")

    @classmethod
    def load(cls, path) -> "KnifeModel":
        try:
            doc = json.loads(Path(path).read_text())
        except json.JSONDecodeError as exc:
            raise ValueError(f"{path}: not a JSON document ({exc.msg})") from None
        return cls.from_dict(doc)


def predict(model: KnifeModel, X_new) -> np.ndarray:
    """Fitted values for raw rows; signs (+1 at ties) for classifiers."""
    f = model.decision_function(X_new)
    if model.task is Task.CLASSIFICATION:
        return np.where(f >= 0, 1.0, -1.0)
    return f


def _penalized(loss, y, K, alpha, alpha0, w, lambda1, lambda2):
    Ka = K @ alpha
    b = alpha0 if loss.uses_intercept else 0.0
    return loss_value(loss, y, b + Ka) + lambda1 * float(alpha @ Ka) + lambda2 * float(w.sum())


def objective(loss: LossSpec, kernel: KernelSpec, X, y, alpha, alpha0, w,
              lambda1, lambda2) -> float:
    """``L(y, alpha0 + K_{w^2} alpha) + lambda1 alpha' K_{w^2} alpha + lambda2 sum(w)``.

    The intercept only enters for classification losses.
    """
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float)
    alpha = np.asarray(alpha, dtype=float)
    w = np.asarray(w, dtype=float)
    if alpha.shape != (X.shape[0],) or y.shape != (X.shape[0],):
        raise ValueError("alpha, y and X have inconsistent sizes")
    value = _penalized(loss, y, kernel_matrix(kernel, w, X), alpha, alpha0, w,
                       lambda1, lambda2)
    if not math.isfinite(value):
        raise FloatingPointError("objective is not finite")
    return value


def alternate(X, y, kernel: KernelSpec, loss: LossSpec, lambda1, lambda2,
              alpha, alpha0, w, max_outer_iter=100, outer_tol=1e-6,
              solver: SolverOptions | None = None):
    """Alternate coefficient and linearized-weight steps from the given start.

    ``X`` may be a :class:`KernelCache` built for ``kernel`` to share the
    pair terms across calls. The weight step's proposal is accepted whole
    when it does not raise the exact objective; otherwise the move from the
    previous weights is halved until it does. Returns ``(alpha, alpha0, w, trace)`` with one trace entry
    per outer iteration, taken after the weight step.
    """
    solver = solver or SolverOptions()
    w = np.clip(np.asarray(w, dtype=float), 0.0, 1.0)
    alpha = np.asarray(alpha, dtype=float)
    trace = []
    cache = X if isinstance(X, KernelCache) else KernelCache(kernel, X)
    K = cache.matrix(w)
    for _ in range(max_outer_iter):
        alpha, alpha0 = fit_coefficients(loss, K, y, lambda1, warm=(alpha, alpha0),
                                         options=solver)
        current = _penalized(loss, y, K, alpha, alpha0, w, lambda1, lambda2)
        lin = cache.linearize(w, alpha)
        proposal = fit_weights(loss, lin, alpha, alpha0, y, lambda1, lambda2, warm=w,
                               options=solver)
        step = proposal - w
        accepted = False
        for _ in range(_MAX_STEP_HALVINGS):
            w_try = np.clip(w + step, 0.0, 1.0)
            K_try = cache.matrix(w_try)
            value = _penalized(loss, y, K_try, alpha, alpha0, w_try, lambda1, lambda2)
            if value <= current:
                accepted = True
                break
            step = 0.5 * step
        if accepted:
            w, K = w_try, K_try
        else:
            value = current
        if not math.isfinite(value):
            raise FloatingPointError("objective became non-finite")
        if trace and value > trace[-1] + 1e-8 * (1.0 + abs(trace[-1])):
            logger.warning("objective increased from %r to %r", trace[-1], value)
        trace.append(value)
        if len(trace) > 1 and abs(trace[-2] - value) <= outer_tol * abs(trace[-2]):
            break
    return alpha, alpha0, w, trace


def _hinge_report(model: KnifeModel, y) -> float:
    K = kernel_matrix(model.kernel, model.w, model.X_train)
    return _penalized(LossSpec(LossFamily.HINGE), y, K, model.alpha, model.alpha0,
                      model.w, model.lambda1, model.lambda2)


def _check_fit_inputs(data: Dataset, loss: LossSpec):
    if loss.family is LossFamily.HINGE:
        raise ValueError(
            "KNIFE iterations need a smooth loss; use squared-hinge or huber-hinge "
            "in place of the hinge loss"
        )
    if loss.is_classification != (data.task is Task.CLASSIFICATION):
        raise ValueError(f"loss {loss.family.value!r} does not match a {data.task.value} task")


def response_offset(data: Dataset) -> float:
    """Mean response for regression (fits use the centered response), else 0."""
    return float(data.y.mean()) if data.task is Task.REGRESSION else 0.0


def _make_model(data, kernel, loss, lambda1, lambda2, alpha, alpha0, w, trace):
    model = KnifeModel(
        alpha=np.asarray(alpha, dtype=float),
        alpha0=float(alpha0) if loss.uses_intercept else 0.0,
        w=np.asarray(w, dtype=float),
        kernel=kernel,
        loss=loss,
        lambda1=float(lambda1),
        lambda2=float(lambda2),
        objective_trace=[float(v) for v in trace],
        means=data.means,
        scales=data.scales,
        X_train=data.X,
        task=data.task,
        y_offset=response_offset(data),
    )
    if data.task is Task.CLASSIFICATION:
        model.hinge_objective = _hinge_report(model, data.y)
    return model


def knife_fit(data: Dataset, kernel: KernelSpec, loss: LossSpec,
              config: FitConfig | None = None) -> KnifeModel:
    """Fit KNIFE from ``config.restarts`` random weight starts; keep the best.

    Restart ``r`` draws its initial weights from child ``r`` of
    ``SeedSequence(config.seed)``, so results depend only on the seed.
    """
    config = config or FitConfig()
    _check_fit_inputs(data, loss)
    y = data.y - response_offset(data)
    cache = KernelCache(kernel, data.X)
    children = np.random.SeedSequence(config.seed).spawn(config.restarts)
    best = None
    for child in children:
        rng = np.random.default_rng(child)
        w0 = rng.uniform(config.init_low, config.init_high, data.p)
        try:
            result = alternate(cache, y, kernel, loss, config.lambda1, config.lambda2,
                               np.zeros(data.n), 0.0, w0, config.max_outer_iter,
                               config.outer_tol, config.solver)
        except (FloatingPointError, np.linalg.LinAlgError) as exc:
            logger.warning("restart failed: %s", exc)
            continue
        final = result[3][-1]
        if math.isfinite(final) and (best is None or final < best[3][-1]):
            best = result
    if best is None:
        raise RuntimeError("no restart produced a finite objective")
    alpha, alpha0, w, trace = best
    return _make_model(data, kernel, loss, config.lambda1, config.lambda2,
                       alpha, alpha0, w, trace)


@dataclass
class PathResult:
    lambda2_grid: np.ndarray
    weights: list
    objectives: np.ndarray
    support_sizes: np.ndarray
    terminal_lambda2: float
    alphas: list = field(default_factory=list, repr=False)
    intercepts: list = field(default_factory=list, repr=False)
    kernel: KernelSpec | None = None
    loss: LossSpec | None = None
    lambda1: float = 1.0

    def __len__(self):
        return len(self.lambda2_grid)

    def weight_matrix(self) -> np.ndarray:
        return np.vstack(self.weights)

    def exit_lambda2(self) -> np.ndarray:
        """Per feature, the first grid value at which its weight is zero."""
        W = self.weight_matrix()
        out = np.empty(W.shape[1])
        for j in range(W.shape[1]):
            zero = np.flatnonzero(W[:, j] == 0)
            out[j] = self.lambda2_grid[zero[0]] if zero.size else np.inf
        return out

    def model_at(self, k: int, data: Dataset) -> KnifeModel:
        """The fitted model at grid index ``k`` (``data`` is the training set)."""
        return KnifeModel(
            alpha=self.alphas[k], alpha0=self.intercepts[k], w=self.weights[k],
            kernel=self.kernel, loss=self.loss, lambda1=self.lambda1,
            lambda2=float(self.lambda2_grid[k]),
            objective_trace=[float(self.objectives[k])], means=data.means,
            scales=data.scales, X_train=data.X, task=data.task,
            y_offset=response_offset(data),
        )

    def to_csv(self, path):
        p = len(self.weights[0])
        with Path(path).open("w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["lambda2", "objective", "support_size"]
                            + [f"w_{j + 1}" for j in range(p)])
            for lam, obj, size, w in zip(self.lambda2_grid, self.objectives,
                                         self.support_sizes, self.weights):
                writer.writerow([repr(float(lam)), repr(float(obj)), int(size)]
                                + [repr(float(v)) for v in w])


def knife_path(data: Dataset, kernel: KernelSpec, loss: LossSpec, lambda1: float = 1.0,
               grid: GridSpec | None = None, seed: int = 0,
               config: FitConfig | None = None,
               truncate: int | None = None, lambdas=None) -> PathResult:
    """Trace feature weights from ``lambda2 = 0`` until every weight is zero.

    The first point is a full restarted fit; each later point warm-starts the
    alternating loop from the previous point's coefficients and weights.
    With ``truncate`` the path stops quietly after that many points instead
    of running to the empty model. An explicit non-decreasing ``lambdas``
    sequence replaces the grid rule and is walked to its end.
    """
    grid = grid or GridSpec()
    if lambdas is not None:
        lambdas = [float(v) for v in lambdas]
        if not lambdas:
            raise ValueError("lambdas must not be empty")
        if lambdas[0] < 0 or any(b < a for a, b in zip(lambdas, lambdas[1:])):
            raise ValueError("lambdas must be non-negative and non-decreasing")
    start = lambdas[0] if lambdas is not None else 0.0
    config = replace(config or FitConfig(), lambda1=lambda1, lambda2=start, seed=seed)
    first = knife_fit(data, kernel, loss, config)
    lams, weights, objs, alphas, intercepts = [start], [first.w], [first.objective], \
        [first.alpha], [first.alpha0]
    alpha, alpha0, w, lam = first.alpha, first.alpha0, first.w, start
    y = data.y - first.y_offset
    cache = KernelCache(kernel, data.X)

    def upcoming():
        if lambdas is not None:
            return lambdas[len(lams)] if len(lams) < len(lambdas) else None
        if not np.any(w > 0) or (truncate is not None and len(lams) >= truncate):
            return None
        if len(lams) >= grid.max_points:
            raise RuntimeError(
                f"support did not empty within the cap of {grid.max_points} grid points "
                f"(last lambda2 = {lam:.6g})"
            )
        return grid.next(lam)

    while (nxt := upcoming()) is not None:
        lam = nxt
        alpha, alpha0, w, trace = alternate(
            cache, y, kernel, loss, lambda1, lam, alpha, alpha0, w,
            config.max_outer_iter, config.outer_tol, config.solver)
        lams.append(lam)
        weights.append(w)
        objs.append(trace[-1])
        alphas.append(alpha)
        intercepts.append(alpha0 if loss.uses_intercept else 0.0)
    weights = [np.asarray(v, dtype=float) for v in weights]
    return PathResult(
        lambda2_grid=np.asarray(lams),
        weights=weights,
        objectives=np.asarray(objs),
        support_sizes=np.array([int(np.count_nonzero(v)) for v in weights]),
        terminal_lambda2=float(lams[-1]),
        alphas=alphas,
        intercepts=intercepts,
        kernel=kernel,
        loss=loss,
        lambda1=float(lambda1),
    )
