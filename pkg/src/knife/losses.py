"""Loss functions on fitted values, summed over observations."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np
from scipy.special import expit

__all__ = [
    "LossFamily",
    "LossSpec",
    "UnsupportedGradientError",
    "loss_terms",
    "loss_value",
    "loss_gradient",
    "curvature_bound",
    "value_and_gradient",
]


class UnsupportedGradientError(ValueError):
    """Raised when a gradient is requested for the non-differentiable hinge."""


class LossFamily(str, Enum):
    SQUARED_ERROR = "squared-error"
    HINGE = "hinge"
    SQUARED_HINGE = "squared-hinge"
    HUBER_HINGE = "huber-hinge"
    BINOMIAL_DEVIANCE = "binomial-deviance"


_ALIASES = {
    "squared-error": LossFamily.SQUARED_ERROR,
    "squared": LossFamily.SQUARED_ERROR,
    "ls": LossFamily.SQUARED_ERROR,
    "hinge": LossFamily.HINGE,
    "squared-hinge": LossFamily.SQUARED_HINGE,
    "huber-hinge": LossFamily.HUBER_HINGE,
    "huberized-hinge": LossFamily.HUBER_HINGE,
    "binomial-deviance": LossFamily.BINOMIAL_DEVIANCE,
    "logistic": LossFamily.BINOMIAL_DEVIANCE,
}


@dataclass(frozen=True)
class LossSpec:
    family: LossFamily = LossFamily.SQUARED_ERROR
    huber_delta: float = 0.5

    def __post_init__(self):
        object.__setattr__(self, "family", LossFamily(self.family))
        if not (np.isfinite(self.huber_delta) and self.huber_delta > 0):
            raise ValueError(f"huber_delta must be positive, got {self.huber_delta!r}")
        object.__setattr__(self, "huber_delta", float(self.huber_delta))

    @classmethod
    def from_name(cls, name: str, huber_delta: float = 0.5) -> "LossSpec":
        try:
            family = _ALIASES[name.lower()]
        except KeyError:
            raise ValueError(
                f"unknown loss {name!r}; expected one of {sorted(_ALIASES)}"
            ) from None
        return cls(family, huber_delta)

    @property
    def is_classification(self) -> bool:
        return self.family is not LossFamily.SQUARED_ERROR

    @property
    def uses_intercept(self) -> bool:
        return self.is_classification

    @property
    def is_smooth(self) -> bool:
        return self.family is not LossFamily.HINGE

    def to_dict(self) -> dict:
        return {"family": self.family.value, "huber_delta": self.huber_delta}

    @classmethod
    def from_dict(cls, d: dict) -> "LossSpec":
        return cls(LossFamily(d["family"]), d.get("huber_delta", 0.5))


def _check(loss: LossSpec, y, f):
    y = np.asarray(y, dtype=float)
    f = np.asarray(f, dtype=float)
    if y.shape != f.shape or y.ndim != 1:
        raise ValueError(f"y and f must be 1-d of equal length, got {y.shape} and {f.shape}")
    if loss.is_classification and not np.all(np.abs(y) == 1.0):
        raise ValueError("classification losses require labels in {-1, +1}")
    return y, f


def loss_terms(loss: LossSpec, y, f) -> np.ndarray:
    """Per-observation loss values."""
    y, f = _check(loss, y, f)
    return _terms(loss, y, f)


def _terms(loss, y, f):
    fam = loss.family
    if fam is LossFamily.SQUARED_ERROR:
        r = y - f
        return r * r
    t = y * f
    if fam is LossFamily.HINGE:
        return np.maximum(1.0 - t, 0.0)
    if fam is LossFamily.SQUARED_HINGE:
        h = np.maximum(1.0 - t, 0.0)
        return h * h
    if fam is LossFamily.HUBER_HINGE:
        delta = loss.huber_delta
        u = 1.0 - t
        return np.where(u <= 0.0, 0.0, np.where(u <= delta, u * u / (2.0 * delta), u - delta / 2.0))
    return np.logaddexp(0.0, -t)


def loss_value(loss: LossSpec, y, f) -> float:
    return float(np.sum(loss_terms(loss, y, f)))


def loss_gradient(loss: LossSpec, y, f) -> np.ndarray:
    """Componentwise derivative of the summed loss with respect to ``f``."""
    if loss.family is LossFamily.HINGE:
        raise UnsupportedGradientError(
            "the hinge loss is not differentiable; use squared-hinge or huber-hinge"
        )
    y, f = _check(loss, y, f)
    return _grad(loss, y, f)


def _grad(loss, y, f):
    fam = loss.family
    if fam is LossFamily.SQUARED_ERROR:
        return 2.0 * (f - y)
    t = y * f
    if fam is LossFamily.SQUARED_HINGE:
        return -2.0 * y * np.maximum(1.0 - t, 0.0)
    if fam is LossFamily.HUBER_HINGE:
        delta = loss.huber_delta
        u = 1.0 - t
        return -y * np.clip(u / delta, 0.0, 1.0)
    return -y * expit(-t)


def value_and_gradient(loss: LossSpec, y, f):
    """Summed loss and its gradient, without input checks (solver inner loops)."""
    fam = loss.family
    if fam is LossFamily.SQUARED_HINGE:
        h = np.maximum(1.0 - y * f, 0.0)
        return float(h @ h), -2.0 * y * h
    if fam is LossFamily.SQUARED_ERROR:
        r = f - y
        return float(r @ r), 2.0 * r
    return float(np.sum(_terms(loss, y, f))), _grad(loss, y, f)


def curvature_bound(loss: LossSpec) -> float:
    """Upper bound on the second derivative of a single loss term."""
    fam = loss.family
    if fam in (LossFamily.SQUARED_ERROR, LossFamily.SQUARED_HINGE):
        return 2.0
    if fam is LossFamily.HUBER_HINGE:
        return 1.0 / loss.huber_delta
    if fam is LossFamily.BINOMIAL_DEVIANCE:
        return 0.25
    raise UnsupportedGradientError("the hinge loss has no curvature bound")
