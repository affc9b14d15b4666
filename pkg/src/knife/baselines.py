"""Comparison methods: ridge, kernel ridge, unweighted SVM, SIS and RFE.

Every baseline is an ordinary kernel machine with a 0/1 feature mask in
place of learned weights, so it is returned as a :class:`KnifeModel` and
predicts like one.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

from .data import Dataset, Task
from .kernels import KernelCache, KernelFamily, KernelSpec, kernel_matrix
from .losses import LossFamily, LossSpec
from .model import KnifeModel, _make_model, _penalized, response_offset
from .optim import SolverOptions, fit_coefficients

__all__ = [
    "Method",
    "FeatureRanking",
    "sis_rank",
    "rfe_rank",
    "fit_baseline",
    "baseline_kernel",
]


class Method(str, Enum):
    RIDGE = "ridge"
    KERNEL_RIDGE = "kernel-ridge"
    SVM = "svm"


@dataclass
class FeatureRanking:
    """Feature order plus a score per feature.

    For SIS ``order`` lists the top-ranked feature first; for RFE it lists
    features in elimination order (``best_first=False``), so the last entry
    is the final survivor.
    """

    order: np.ndarray
    scores: np.ndarray
    best_first: bool = True

    def __post_init__(self):
        self.order = np.asarray(self.order, dtype=int)
        self.scores = np.asarray(self.scores, dtype=float)
        if sorted(self.order.tolist()) != list(range(self.order.size)):
            raise ValueError("order must be a permutation of the feature indices")

    def top(self, k: int) -> np.ndarray:
        """Indices of the ``k`` most relevant features, in ranking order."""
        return self.order[:k] if self.best_first else self.order[::-1][:k]


def sis_rank(data: Dataset) -> FeatureRanking:
    """Rank features by absolute marginal correlation with the response."""
    X, y = data.X, data.y
    xc = X - X.mean(axis=0)
    yc = y - y.mean()
    denom = np.sqrt((xc * xc).sum(axis=0) * float(yc @ yc))
    with np.errstate(invalid="ignore", divide="ignore"):
        corr = np.where(denom > 0, (xc.T @ yc) / denom, 0.0)
    scores = np.abs(corr)
    # stable sort on the negated score keeps lower indices first among ties
    order = np.argsort(-scores, kind="stable")
    return FeatureRanking(order, scores)


def _loss_for(data: Dataset) -> LossSpec:
    if data.task is Task.CLASSIFICATION:
        return LossSpec(LossFamily.SQUARED_HINGE)
    return LossSpec(LossFamily.SQUARED_ERROR)


def _mask(p, features) -> np.ndarray:
    w = np.zeros(p)
    w[np.asarray(features, dtype=int)] = 1.0
    return w


def rfe_rank(data: Dataset, kernel: KernelSpec, loss: LossSpec | None = None,
             lambda1: float = 1.0, schedule=None,
             solver: SolverOptions | None = None) -> FeatureRanking:
    """Backward elimination by objective increase when a feature is dropped.

    Each round fits the unweighted kernel machine on the surviving features,
    then scores every survivor by how much the training objective grows when
    its kernel contribution is removed (coefficients held fixed). The
    ``schedule`` gives batch sizes per round; its last entry repeats until a
    single feature is left. Scores are recorded at elimination time; the
    final survivor scores ``inf``.
    """
    if schedule is None:
        schedule = [1]
    schedule = [int(s) for s in schedule]
    if not schedule:
        raise ValueError("schedule must contain at least one batch size")
    if any(s < 1 for s in schedule):
        raise ValueError("schedule batch sizes must be positive")
    if sum(schedule) > data.p:
        raise ValueError(f"schedule removes {sum(schedule)} features but there are {data.p}")
    loss = loss or _loss_for(data)
    y = data.y - response_offset(data)
    cache = KernelCache(kernel, data.X)
    survivors = list(range(data.p))
    order, scores = [], np.full(data.p, np.inf)
    warm = None
    rnd = 0
    while len(survivors) > 1:
        w = _mask(data.p, survivors)
        K = cache.matrix(w)
        alpha, alpha0 = fit_coefficients(loss, K, y, lambda1, warm=warm, options=solver)
        warm = (alpha, alpha0)
        base = _penalized(loss, y, K, alpha, alpha0, w, lambda1, 0.0)
        increase = []
        for j in survivors:
            w_j = w.copy()
            w_j[j] = 0.0
            increase.append(_penalized(loss, y, cache.matrix(w_j), alpha, alpha0, w_j,
                                       lambda1, 0.0) - base)
        batch = schedule[min(rnd, len(schedule) - 1)]
        batch = min(batch, len(survivors) - 1)
        drop = np.argsort(np.asarray(increase), kind="stable")[:batch]
        for k in drop:
            scores[survivors[k]] = increase[k]
        gone = [survivors[k] for k in drop]
        order.extend(gone)
        survivors = [j for j in survivors if j not in gone]
        rnd += 1
    order.extend(survivors)
    return FeatureRanking(order, scores, best_first=False)


def baseline_kernel(family, n_features: int, degree: int = 2) -> KernelSpec:
    """Unweighted kernel on ``n_features`` inputs (Gaussian scale ``1/n_features``)."""
    family = KernelFamily(family)
    gamma = 1.0 / max(n_features, 1)
    return KernelSpec(family, degree=degree, gamma=gamma)


def fit_baseline(data: Dataset, method, param: float, kernel: KernelSpec | None = None,
                 features=None, solver: SolverOptions | None = None,
                 warm=None) -> KnifeModel:
    """Fit a baseline with penalty ``param`` on the given feature subset.

    ``ridge`` is the linear kernel with squared error; ``kernel-ridge`` uses
    ``kernel`` with squared error; ``svm`` uses ``kernel`` with the squared
    hinge. ``features`` (indices) restricts the inputs; all are used by default.
    """
    method = Method(method)
    if param < 0:
        raise ValueError("penalty must be non-negative")
    if method is Method.RIDGE:
        kernel = KernelSpec(KernelFamily.LINEAR)
    elif kernel is None:
        raise ValueError(f"method {method.value!r} needs a kernel")
    if method is Method.SVM:
        if data.task is not Task.CLASSIFICATION:
            raise ValueError("svm needs a classification dataset")
        loss = LossSpec(LossFamily.SQUARED_HINGE)
    else:
        if data.task is not Task.REGRESSION:
            raise ValueError(f"{method.value} needs a regression dataset")
        loss = LossSpec(LossFamily.SQUARED_ERROR)
    w = np.ones(data.p) if features is None else _mask(data.p, features)
    y = data.y - response_offset(data)
    K = kernel_matrix(kernel, w, data.X)
    alpha, alpha0 = fit_coefficients(loss, K, y, param, warm=warm, options=solver)
    value = _penalized(loss, y, K, alpha, alpha0, w, param, 0.0)
    return _make_model(data, kernel, loss, param, 0.0, alpha, alpha0, w, [value])
