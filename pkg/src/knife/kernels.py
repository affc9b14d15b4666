"""Feature-weighted kernels.

Every kernel here takes the weight vector ``w`` and applies ``w**2`` to the
features before the kernel nonlinearity, so that gradients with respect to
``w`` carry a factor ``w_j`` and a zero weight stays zero under linearization.

All four families share the form ``k(x, x') = phi(sum_j w_j**2 c_j(x, x'))``:

========================  =========================  =====================
family                    c_j(x, x')                 phi(s)
========================  =========================  =====================
linear                    x_j x'_j                   s
gaussian                  -gamma (x_j - x'_j)**2     exp(s)
poly-homogeneous          x_j x'_j                   s**d
poly-inhomogeneous        x_j x'_j                   (s + 1)**d
========================  =========================  =====================
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum

import numpy as np

__all__ = [
    "KernelFamily",
    "KernelSpec",
    "LinearizedKernel",
    "kernel_value",
    "kernel_matrix",
    "kernel_cross_matrix",
    "kernel_gradient",
    "kernel_gradient_tensor",
    "linearize",
    "KernelCache",
]

# rows of the left operand processed per block when building n x m x p tensors
_BLOCK_ROWS = 256


class KernelFamily(str, Enum):
    LINEAR = "linear"
    GAUSSIAN = "gaussian"
    POLY_HOMOGENEOUS = "poly-homogeneous"
    POLY_INHOMOGENEOUS = "poly-inhomogeneous"


_ALIASES = {
    "linear": KernelFamily.LINEAR,
    "inner-product": KernelFamily.LINEAR,
    "gaussian": KernelFamily.GAUSSIAN,
    "radial": KernelFamily.GAUSSIAN,
    "rbf": KernelFamily.GAUSSIAN,
    "poly-homogeneous": KernelFamily.POLY_HOMOGENEOUS,
    "poly-hom": KernelFamily.POLY_HOMOGENEOUS,
    "poly-inhomogeneous": KernelFamily.POLY_INHOMOGENEOUS,
    "poly": KernelFamily.POLY_INHOMOGENEOUS,
    "polynomial": KernelFamily.POLY_INHOMOGENEOUS,
}


@dataclass(frozen=True)
class KernelSpec:
    """Kernel family plus its shape parameters.

    ``degree`` is used by the polynomial families only and ``gamma`` by the
    Gaussian family only; the unused one is carried along but ignored.
    """

    family: KernelFamily = KernelFamily.GAUSSIAN
    degree: int = 2
    gamma: float = 1.0

    def __post_init__(self):
        object.__setattr__(self, "family", KernelFamily(self.family))
        if self.is_polynomial and (int(self.degree) != self.degree or self.degree < 1):
            raise ValueError(f"degree must be a positive integer, got {self.degree!r}")
        if self.family is KernelFamily.GAUSSIAN and not (
            np.isfinite(self.gamma) and self.gamma > 0
        ):
            raise ValueError(f"gamma must be positive, got {self.gamma!r}")
        object.__setattr__(self, "degree", int(self.degree))
        object.__setattr__(self, "gamma", float(self.gamma))

    @classmethod
    def from_name(cls, name: str, degree: int = 2, gamma: float = 1.0) -> "KernelSpec":
        try:
            family = _ALIASES[name.lower()]
        except KeyError:
            raise ValueError(
                f"unknown kernel {name!r}; expected one of {sorted(_ALIASES)}"
            ) from None
        return cls(family, degree, gamma)

    @property
    def is_polynomial(self) -> bool:
        return self.family in (KernelFamily.POLY_HOMOGENEOUS, KernelFamily.POLY_INHOMOGENEOUS)

    def to_dict(self) -> dict:
        return {"family": self.family.value, "degree": self.degree, "gamma": self.gamma}

    @classmethod
    def from_dict(cls, d: dict) -> "KernelSpec":
        return cls(KernelFamily(d["family"]), d.get("degree", 2), d.get("gamma", 1.0))


@dataclass
class LinearizedKernel:
    """First-order expansion of ``K_{w**2}`` around ``w_anchor``.

    The linearized fitted values at weights ``w`` are ``B @ alpha + A @ w``
    where ``alpha`` is ``alpha_anchor``.
    """

    b_matrix: np.ndarray
    a_matrix: np.ndarray
    w_anchor: np.ndarray
    alpha_anchor: np.ndarray


# -- internals ----------------------------------------------------------------


def _as_vector(a, name):
    a = np.asarray(a, dtype=float)
    if a.ndim != 1:
        raise ValueError(f"{name} must be a 1-d array, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} contains non-finite values")
    return a


def _as_matrix(a, name):
    a = np.asarray(a, dtype=float)
    if a.ndim == 1:
        a = a[None, :]
    if a.ndim != 2:
        raise ValueError(f"{name} must be a 2-d array, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} contains non-finite values")
    return a


def _check_weights(w, p):
    w = _as_vector(w, "w")
    if w.shape[0] != p:
        raise ValueError(f"weight vector has length {w.shape[0]}, data has {p} features")
    return w


def _pair_terms(spec: KernelSpec, X1: np.ndarray, X2: np.ndarray) -> np.ndarray:
    """Per-feature terms c_j for every row pair, shape (m, n, p)."""
    if spec.family is KernelFamily.GAUSSIAN:
        diff = X1[:, None, :] - X2[None, :, :]
        return -spec.gamma * (diff * diff)
    return X1[:, None, :] * X2[None, :, :]


def _phi(spec: KernelSpec, s):
    fam = spec.family
    if fam is KernelFamily.LINEAR:
        return s
    if fam is KernelFamily.GAUSSIAN:
        return np.exp(s)
    if fam is KernelFamily.POLY_HOMOGENEOUS:
        return s**spec.degree
    return (s + 1.0) ** spec.degree


def _dphi(spec: KernelSpec, s):
    fam = spec.family
    if fam is KernelFamily.LINEAR:
        return np.ones_like(s)
    if fam is KernelFamily.GAUSSIAN:
        return np.exp(s)
    d = spec.degree
    base = s if fam is KernelFamily.POLY_HOMOGENEOUS else s + 1.0
    return d * base ** (d - 1)


def _weighted_sum(spec, w, X1, X2):
    """s(i, j) = sum_k w_k**2 c_k(x_i, x_j), computed block-wise."""
    v = w * w
    out = np.empty((X1.shape[0], X2.shape[0]))
    for start in range(0, X1.shape[0], _BLOCK_ROWS):
        stop = start + _BLOCK_ROWS
        out[start:stop] = _pair_terms(spec, X1[start:stop], X2) @ v
    return out


# -- public API ---------------------------------------------------------------


def kernel_value(spec: KernelSpec, w, x, x_prime) -> float:
    """Evaluate ``k_{w**2}(x, x')`` for a single pair of points."""
    w = _as_vector(w, "w")
    x = _as_vector(x, "x")
    x_prime = _as_vector(x_prime, "x_prime")
    if not (w.shape == x.shape == x_prime.shape):
        raise ValueError(
            f"dimension mismatch: w {w.shape}, x {x.shape}, x_prime {x_prime.shape}"
        )
    s = _weighted_sum(spec, w, x[None, :], x_prime[None, :])
    return float(_phi(spec, s)[0, 0])


def kernel_matrix(spec: KernelSpec, w, X) -> np.ndarray:
    """Symmetric n x n matrix of ``k_{w**2}(x_i, x_j)``."""
    X = _as_matrix(X, "X")
    w = _check_weights(w, X.shape[1])
    return _phi(spec, _weighted_sum(spec, w, X, X))


def kernel_cross_matrix(spec: KernelSpec, w, X_train, X_new) -> np.ndarray:
    """m x n matrix with entry (i, j) = ``k_{w**2}(X_new[i], X_train[j])``."""
    X_train = _as_matrix(X_train, "X_train")
    X_new = _as_matrix(X_new, "X_new")
    if X_train.shape[1] != X_new.shape[1]:
        raise ValueError(
            f"column mismatch: X_train has {X_train.shape[1]}, X_new has {X_new.shape[1]}"
        )
    w = _check_weights(w, X_train.shape[1])
    return _phi(spec, _weighted_sum(spec, w, X_new, X_train))


def kernel_gradient(spec: KernelSpec, w, x, x_prime) -> np.ndarray:
    """Gradient of ``k_{w**2}(x, x')`` with respect to ``w`` (not ``w**2``)."""
    w = _as_vector(w, "w")
    x = _as_vector(x, "x")
    x_prime = _as_vector(x_prime, "x_prime")
    if not (w.shape == x.shape == x_prime.shape):
        raise ValueError(
            f"dimension mismatch: w {w.shape}, x {x.shape}, x_prime {x_prime.shape}"
        )
    return kernel_gradient_tensor(spec, w, x[None, :], x_prime[None, :])[0, 0]


def kernel_gradient_tensor(spec: KernelSpec, w, X1, X2) -> np.ndarray:
    """Gradients for all row pairs, shape (m, n, p)."""
    X1 = _as_matrix(X1, "X1")
    X2 = _as_matrix(X2, "X2")
    if X1.shape[1] != X2.shape[1]:
        raise ValueError("column mismatch between X1 and X2")
    w = _check_weights(w, X1.shape[1])
    C = _pair_terms(spec, X1, X2)
    s = C @ (w * w)
    return (2.0 * _dphi(spec, s))[:, :, None] * C * w


def linearize(spec: KernelSpec, w_prev, X, alpha) -> LinearizedKernel:
    """Linearize ``K_{w**2}`` entrywise around ``w_prev``.

    Returns ``B`` with ``B_ii' = k(i, i') - grad k(i, i') . w_prev`` and ``A``
    whose row ``i`` is ``sum_i' alpha_i' grad k(i, i')``.
    """
    return KernelCache(spec, X).linearize(w_prev, alpha)


class KernelCache:
    """Pair terms of a fixed training matrix, reused across weight vectors.

    Holds the (n, n, p) tensor of per-feature terms, so repeated kernel
    matrices and linearizations on the same rows cost one contraction each.
    """

    def __init__(self, spec: KernelSpec, X):
        self.spec = spec
        self.X = _as_matrix(X, "X")
        self.terms = _pair_terms(spec, self.X, self.X)

    @property
    def n(self) -> int:
        return self.X.shape[0]

    def matrix(self, w) -> np.ndarray:
        w = _check_weights(w, self.X.shape[1])
        return _phi(self.spec, self.terms @ (w * w))

    def linearize(self, w_prev, alpha) -> LinearizedKernel:
        n, p = self.X.shape
        w_prev = _check_weights(w_prev, p)
        alpha = _as_vector(alpha, "alpha")
        if alpha.shape[0] != n:
            raise ValueError(f"alpha has length {alpha.shape[0]}, expected {n}")
        s = self.terms @ (w_prev * w_prev)
        dk = _dphi(self.spec, s)
        # grad k . w_prev = 2 phi'(s) sum_j w_j^2 c_j = 2 phi'(s) s
        B = _phi(self.spec, s) - 2.0 * dk * s
        A = np.einsum("ikj,ik->ij", self.terms, dk * alpha[None, :])
        A *= 2.0 * w_prev
        return LinearizedKernel(B, A, w_prev.copy(), alpha.copy())
