"""Convex block solvers used by the alternating KNIFE iterations.

``fit_coefficients`` solves for ``(alpha, alpha0)`` at fixed kernel;
``fit_weights`` solves the box-constrained weight problem on a linearized
kernel. Both smooth solvers share :func:`_descend`, an accelerated projected
gradient method with a diagonal metric and backtracking.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .kernels import LinearizedKernel
from .losses import (
    LossFamily,
    LossSpec,
    UnsupportedGradientError,
    _check,
    curvature_bound,
    loss_value,
    value_and_gradient,
)

__all__ = ["SolverOptions", "fit_coefficients", "fit_weights", "coefficient_objective",
           "weight_objective"]

# eigenvalues below this fraction of the largest are treated as zero
_EIG_RTOL = 1e-12


@dataclass(frozen=True)
class SolverOptions:
    max_inner_iter: int = 500
    grad_tol: float = 1e-8
    backtrack_beta: float = 0.5
    initial_step: float = 1.0

    def __post_init__(self):
        if self.max_inner_iter < 1:
            raise ValueError("max_inner_iter must be positive")
        if not self.grad_tol > 0:
            raise ValueError("grad_tol must be positive")
        if not 0 < self.backtrack_beta < 1:
            raise ValueError("backtrack_beta must lie in (0, 1)")
        if not self.initial_step > 0:
            raise ValueError("initial_step must be positive")


class _Diagonal:
    def __init__(self, m):
        self.m = m

    def solve(self, g):
        return g / self.m

    def quad(self, d):
        return (self.m * d) @ d


class _ArrowMetric:
    """Metric ``[[diag(dvec), v], [v', s]]`` for (coefficients, intercept).

    Solved through the Schur complement of the intercept block.
    """

    def __init__(self, dvec, v, s):
        self.d = dvec
        self.v = v
        self.dinv_v = v / dvec
        self.schur = max(s - v @ self.dinv_v, 1e-12 * s)

    def solve(self, g):
        gb, g0 = g[:-1], g[-1]
        d0 = (g0 - self.dinv_v @ gb) / self.schur
        out = np.empty_like(g)
        out[:-1] = (gb - self.v * d0) / self.d
        out[-1] = d0
        return out

    def quad(self, z):
        zb, z0 = z[:-1], z[-1]
        return (self.d * zb) @ zb + 2.0 * z0 * (self.v @ zb) + (self.schur + self.v @ self.dinv_v) * z0 * z0


def _descend(fg, x0, lower, upper, metric, opts: SolverOptions):
    """Minimize a smooth convex function over a box.

    Steps are ``clip(y - t * M^-1 g)`` with FISTA momentum, restarted
    whenever the objective would increase, so the iterates are monotone and
    never worse than ``x0``. ``metric`` supplies ``M``; it must be diagonal
    when the box is bounded. Stops when the projected gradient norm is at
    most ``grad_tol * (1 + |f|)``.
    """
    if np.isfinite(lower) or np.isfinite(upper):
        def proj(z):
            return np.minimum(np.maximum(z, lower), upper)

        def projected_gradient(z, grad):
            # drop components that push against an active bound
            blocked = ((z <= lower) & (grad > 0)) | ((z >= upper) & (grad < 0))
            return np.where(blocked, 0.0, grad)
    else:
        def proj(z):
            return z

        def projected_gradient(z, grad):
            return grad
    beta = opts.backtrack_beta
    tol = opts.grad_tol
    x = proj(np.asarray(x0, dtype=float))
    f, g = fg(x)
    if not math.isfinite(f):
        raise FloatingPointError("objective is not finite at the starting point")
    y, fy, gy = x, f, g
    theta = 1.0
    t = opts.initial_step
    t_max = opts.initial_step * 1e6
    for _ in range(opts.max_inner_iter):
        pg = projected_gradient(x, g)
        if math.sqrt(pg @ pg) <= tol * (1.0 + abs(f)):
            break
        while True:
            x_new = proj(y - t * metric.solve(gy))
            d = x_new - y
            f_new, g_new = fg(x_new)
            model = fy + gy @ d + 0.5 * metric.quad(d) / t
            if math.isfinite(f_new) and f_new <= model + 1e-12 * (1.0 + abs(fy)):
                break
            t *= beta
            if t < 1e-30:
                return x, f
        if f_new > f:
            # momentum overshoot: restart from the current iterate
            if y is x:
                return x, f
            y, fy, gy = x, f, g
            theta = 1.0
            continue
        theta_new = 0.5 * (1.0 + math.sqrt(1.0 + 4.0 * theta * theta))
        y = proj(x_new + ((theta - 1.0) / theta_new) * (x_new - x))
        x, f, g = x_new, f_new, g_new
        theta = theta_new
        fy, gy = fg(y)
        if not math.isfinite(fy):
            y, fy, gy, theta = x, f, g, 1.0
        t = min(t / beta, t_max)
    return x, f


def coefficient_objective(loss: LossSpec, K, y, lambda1, alpha, alpha0=0.0) -> float:
    """``L(y, alpha0 + K alpha) + lambda1 alpha' K alpha``."""
    Ka = K @ alpha
    return loss_value(loss, y, alpha0 + Ka) + lambda1 * float(alpha @ Ka)


def fit_coefficients(loss: LossSpec, K, y, lambda1: float, warm=None,
                     options: SolverOptions | None = None):
    """Minimize ``L(y, alpha0 + K alpha) + lambda1 alpha' K alpha``.

    Squared error uses the closed form ``(K + lambda1 I)^-1 y`` with no
    intercept. The smooth classification losses are solved in the eigenbasis
    of ``K`` (``K alpha = Phi beta``, ``alpha' K alpha = |beta|^2``), which
    leaves the same problem but far better conditioned.

    Returns ``(alpha, alpha0)``.
    """
    opts = options or SolverOptions()
    if loss.family is LossFamily.HINGE:
        raise UnsupportedGradientError(
            "hinge loss cannot be used in the iterations; use squared-hinge or huber-hinge"
        )
    K = np.asarray(K, dtype=float)
    y = np.asarray(y, dtype=float)
    n = y.shape[0]
    if K.shape != (n, n):
        raise ValueError(f"K has shape {K.shape}, expected ({n}, {n})")
    if lambda1 < 0:
        raise ValueError("lambda1 must be non-negative")
    if np.abs(K - K.T).max() > 1e-10 * max(1.0, np.abs(K).max()):
        raise ValueError("kernel matrix is not symmetric")

    if loss.family is LossFamily.SQUARED_ERROR:
        M = K + lambda1 * np.eye(n)
        if lambda1 == 0 and np.linalg.cond(M) > 1e14:
            raise np.linalg.LinAlgError(
                "singular system: lambda1 = 0 requires a non-singular kernel matrix"
            )
        try:
            alpha = scipy.linalg.solve(M, y, assume_a="pos")
        except np.linalg.LinAlgError:
            alpha = scipy.linalg.solve(M, y, assume_a="sym")
        return alpha, 0.0

    # smooth classification losses
    _check(loss, y, y)
    if warm is None:
        alpha_w, b_w = np.zeros(n), 0.0
    else:
        alpha_w, b_w = np.asarray(warm[0], dtype=float), float(warm[1])
    evals, U = scipy.linalg.eigh(0.5 * (K + K.T))
    top = max(evals.max(), 0.0)
    keep = evals > _EIG_RTOL * top if top > 0 else np.zeros(n, dtype=bool)
    U = U[:, keep]
    root = np.sqrt(evals[keep])
    Phi = U * root
    k = root.shape[0]
    curv = curvature_bound(loss)
    # f = [Phi, 1] @ [beta, b]; the penalty touches beta only
    design = np.hstack([Phi, np.ones((n, 1))])
    design_t = np.ascontiguousarray(design.T)
    pen = np.full(k + 1, lambda1)
    pen[k] = 0.0

    def fg(z):
        val, r = value_and_gradient(loss, y, design @ z)
        pz = pen * z
        return val + float(pz @ z), design_t @ r + 2.0 * pz

    z0 = np.append(root * (U.T @ alpha_w), b_w)
    # curvature bound of the loss times the Gram matrix of [Phi, 1], plus the penalty
    metric = _ArrowMetric(curv * root**2 + 2.0 * lambda1, curv * Phi.sum(axis=0), curv * n)
    z, _ = _descend(fg, z0, -np.inf, np.inf, metric, opts)
    alpha = U @ (z[:k] / root)
    return alpha, float(z[k])


def _weight_problem(loss: LossSpec, lin: LinearizedKernel, alpha, alpha0, y,
                    lambda1, lambda2):
    A = lin.a_matrix
    offset = alpha0 + lin.b_matrix @ alpha
    linear = lambda1 * (A.T @ alpha) + lambda2

    if loss.family is LossFamily.SQUARED_ERROR:
        r0 = y - offset
        Q = A.T @ A
        q = A.T @ r0
        const = float(r0 @ r0)

        def fg(w):
            Qw = Q @ w
            val = const - 2.0 * float(q @ w) + float(w @ Qw) + float(linear @ w)
            return val, 2.0 * (Qw - q) + linear
    else:
        def fg(w):
            val, r = value_and_gradient(loss, y, offset + A @ w)
            return val + float(linear @ w), A.T @ r + linear

    return fg


def weight_objective(loss: LossSpec, lin: LinearizedKernel, alpha, alpha0, y,
                     lambda1, lambda2, w) -> float:
    """Linearized objective minus the ``lambda1 alpha' B alpha`` constant."""
    fg = _weight_problem(loss, lin, np.asarray(alpha, float), alpha0,
                         np.asarray(y, float), lambda1, lambda2)
    return fg(np.asarray(w, float))[0]


def fit_weights(loss: LossSpec, lin: LinearizedKernel, alpha, alpha0: float, y,
                lambda1: float, lambda2: float, warm,
                options: SolverOptions | None = None) -> np.ndarray:
    """Minimize the linearized objective over ``w`` in ``[0, 1]^p``.

    The objective is ``L(y, alpha0 + B alpha + A w) + lambda1 alpha' A w +
    lambda2 sum(w)``; on the box the L1 penalty is linear, so the problem is
    smooth and convex.
    """
    opts = options or SolverOptions()
    if loss.family is LossFamily.HINGE:
        raise UnsupportedGradientError(
            "hinge loss cannot be used in the iterations; use squared-hinge or huber-hinge"
        )
    if lambda1 < 0 or lambda2 < 0:
        raise ValueError("penalties must be non-negative")
    alpha = np.asarray(alpha, dtype=float)
    y = np.asarray(y, dtype=float)
    warm = np.asarray(warm, dtype=float)
    A = lin.a_matrix
    if A.shape != (y.shape[0], warm.shape[0]):
        raise ValueError(f"A has shape {A.shape}, expected {(y.shape[0], warm.shape[0])}")

    _check(loss, y, y)
    fg = _weight_problem(loss, lin, alpha, alpha0, y, lambda1, lambda2)
    val0, _ = fg(np.clip(warm, 0.0, 1.0))
    if not math.isfinite(val0):
        raise FloatingPointError("weight objective is not finite at the warm start")

    colsq = np.einsum("ij,ij->j", A, A)
    metric = curvature_bound(loss) * colsq
    metric[metric <= 1e-300] = 1.0
    w, val = _descend(fg, warm, 0.0, 1.0, _Diagonal(metric), opts)
    if not math.isfinite(val):
        raise FloatingPointError("weight objective is not finite")
    return w
