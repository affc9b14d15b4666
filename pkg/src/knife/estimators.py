"""scikit-learn compatible wrappers around :func:`knife_fit`."""

from __future__ import annotations

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin, RegressorMixin
from sklearn.feature_selection import SelectorMixin
from sklearn.utils.validation import check_array, check_is_fitted, check_X_y

from .data import Dataset, Task
from .kernels import KernelSpec
from .losses import LossSpec
from .model import FitConfig, knife_fit

__all__ = ["KnifeRegressor", "KnifeClassifier"]


class _KnifeBase(SelectorMixin, BaseEstimator):
    _task: Task

    def _config(self) -> FitConfig:
        seed = 0 if self.random_state is None else int(self.random_state)
        return FitConfig(lambda1=self.lambda1, lambda2=self.lambda2,
                         max_outer_iter=self.max_outer_iter, outer_tol=self.outer_tol,
                         restarts=self.restarts, seed=seed)

    def _fit_labels(self, X, y):
        data = Dataset.from_raw(X, y, self._task)
        kernel = KernelSpec.from_name(self.kernel, degree=self.degree, gamma=self.gamma)
        self.model_ = knife_fit(data, kernel, LossSpec.from_name(self.loss), self._config())
        self.n_features_in_ = X.shape[1]
        self.weights_ = self.model_.w
        self.objective_ = self.model_.objective
        return self

    def _get_support_mask(self):
        check_is_fitted(self, "model_")
        return self.model_.w > 0

    def _check_X(self, X):
        check_is_fitted(self, "model_")
        X = check_array(X)
        if X.shape[1] != self.n_features_in_:
            raise ValueError(
                f"X has {X.shape[1]} features, the model was fitted with {self.n_features_in_}"
            )
        return X


class KnifeRegressor(RegressorMixin, _KnifeBase):
    """Kernel regression with learned per-feature weights.

    After fitting, ``weights_`` holds the feature weights and ``transform``
    keeps the columns with nonzero weight.
    """

    _task = Task.REGRESSION

    def __init__(self, kernel="gaussian", degree=2, gamma=1.0, loss="squared-error",
                 lambda1=1.0, lambda2=0.0, max_outer_iter=100, outer_tol=1e-6,
                 restarts=5, random_state=0):
        self.kernel = kernel
        self.degree = degree
        self.gamma = gamma
        self.loss = loss
        self.lambda1 = lambda1
        self.lambda2 = lambda2
        self.max_outer_iter = max_outer_iter
        self.outer_tol = outer_tol
        self.restarts = restarts
        self.random_state = random_state

    def fit(self, X, y):
        X, y = check_X_y(X, y, y_numeric=True)
        return self._fit_labels(X, y)

    def predict(self, X):
        X = self._check_X(X)
        return self.model_.decision_function(X)


class KnifeClassifier(ClassifierMixin, _KnifeBase):
    """Binary kernel classifier with learned per-feature weights.

    Any two class labels are accepted; ``classes_[1]`` is coded as +1.
    """

    _task = Task.CLASSIFICATION

    def __init__(self, kernel="poly-inhomogeneous", degree=2, gamma=1.0,
                 loss="squared-hinge", lambda1=1.0, lambda2=0.0, max_outer_iter=100,
                 outer_tol=1e-6, restarts=5, random_state=0):
        self.kernel = kernel
        self.degree = degree
        self.gamma = gamma
        self.loss = loss
        self.lambda1 = lambda1
        self.lambda2 = lambda2
        self.max_outer_iter = max_outer_iter
        self.outer_tol = outer_tol
        self.restarts = restarts
        self.random_state = random_state

    def fit(self, X, y):
        X, y = check_X_y(X, y)
        self.classes_ = np.unique(y)
        if self.classes_.size != 2:
            raise ValueError(f"need exactly two classes, got {self.classes_.size}")
        return self._fit_labels(X, np.where(y == self.classes_[1], 1.0, -1.0))

    def decision_function(self, X):
        X = self._check_X(X)
        return self.model_.decision_function(X)

    def predict(self, X):
        return self.classes_[(self.decision_function(X) >= 0).astype(int)]
