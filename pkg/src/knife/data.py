"""Datasets, standardization, CSV ingestion and the synthetic generators."""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path

import numpy as np

__all__ = [
    "Task",
    "Dataset",
    "SimSpec",
    "BETA_TRUE",
    "standardize",
    "make_linear",
    "make_sinusoid",
    "make_orange",
    "sample_orange_shell",
    "simulate_linear",
    "simulate_sinusoid",
    "simulate_orange",
    "simulate",
    "load_csv",
    "read_numeric_csv",
    "write_csv",
]

BETA_TRUE = np.array([6.0, -4.0, 3.0, 2.0, -2.0, 0.0, 0.0, 0.0, 0.0, 0.0])

ORANGE_LOW, ORANGE_HIGH = 9.0, 16.0
MAX_SHELL_DRAWS = 1_000_000


class Task(str, Enum):
    REGRESSION = "regression"
    CLASSIFICATION = "classification"


def standardize(X_raw):
    """Center columns and scale by the n-1 standard deviation.

    Constant columns become all zeros with a recorded scale of 1.
    Returns ``(X, means, scales)``.
    """
    X_raw = np.asarray(X_raw, dtype=float)
    if X_raw.ndim != 2 or X_raw.shape[0] < 2:
        raise ValueError("standardize needs a 2-d array with at least two rows")
    means = X_raw.mean(axis=0)
    centered = X_raw - means
    scales = centered.std(axis=0, ddof=1)
    const = scales <= 1e-12 * np.maximum(1.0, np.abs(means))
    scales[const] = 1.0
    centered[:, const] = 0.0
    return centered / scales, means, scales


def _check_labels(y):
    if not np.all(np.isin(y, (-1.0, 1.0))):
        bad = np.unique(y[~np.isin(y, (-1.0, 1.0))])[:5]
        raise ValueError(f"classification labels must be -1 or +1, found {bad.tolist()}")


@dataclass
class Dataset:
    """Standardized features with the statistics used to standardize them."""

    X: np.ndarray
    y: np.ndarray
    task: Task
    means: np.ndarray
    scales: np.ndarray
    feature_names: list[str] = field(default_factory=list)

    def __post_init__(self):
        self.task = Task(self.task)
        self.X = np.asarray(self.X, dtype=float)
        self.y = np.asarray(self.y, dtype=float)
        if self.X.ndim != 2 or self.y.shape != (self.X.shape[0],):
            raise ValueError(f"X {self.X.shape} and y {self.y.shape} do not match")
        if self.task is Task.CLASSIFICATION:
            _check_labels(self.y)
        if not self.feature_names:
            self.feature_names = [f"x_{j + 1}" for j in range(self.X.shape[1])]

    @classmethod
    def from_raw(cls, X_raw, y, task, stats=None, feature_names=None) -> "Dataset":
        """Standardize ``X_raw`` with its own statistics, or with ``stats``
        (a ``(means, scales)`` pair, e.g. from a training set)."""
        X_raw = np.asarray(X_raw, dtype=float)
        if stats is None:
            X, means, scales = standardize(X_raw)
        else:
            means, scales = (np.asarray(s, dtype=float) for s in stats)
            X = (X_raw - means) / scales
        return cls(X, y, task, means, scales, list(feature_names or []))

    @property
    def n(self) -> int:
        return self.X.shape[0]

    @property
    def p(self) -> int:
        return self.X.shape[1]

    @property
    def stats(self):
        return self.means, self.scales

    def raw(self) -> np.ndarray:
        return self.X * self.scales + self.means

    def transform(self, X_raw) -> np.ndarray:
        """Standardize new raw rows with this dataset's statistics."""
        X_raw = np.asarray(X_raw, dtype=float)
        if X_raw.ndim != 2 or X_raw.shape[1] != self.p:
            raise ValueError(f"expected {self.p} columns, got array of shape {X_raw.shape}")
        return (X_raw - self.means) / self.scales

    def subset(self, rows) -> "Dataset":
        """Rows of this dataset, keeping the original statistics."""
        return Dataset(self.X[rows], self.y[rows], self.task, self.means, self.scales,
                       list(self.feature_names))


@dataclass(frozen=True)
class SimSpec:
    name: str
    n: int = 100
    p_noise: int = 6
    seed: int = 0

    def __post_init__(self):
        if self.name not in ("linear", "sinusoid", "orange"):
            raise ValueError(f"unknown simulation {self.name!r}")
        if self.n < 1 or self.p_noise < 0:
            raise ValueError("n must be positive and p_noise non-negative")


# -- generators returning raw arrays -------------------------------------------


def make_linear(n, rng, noise_sd=1.0):
    X = rng.standard_normal((n, BETA_TRUE.size))
    y = X @ BETA_TRUE + noise_sd * rng.standard_normal(n)
    return X, y


def make_sinusoid(n, rng, noise_sd=1.0):
    X = rng.standard_normal((n, BETA_TRUE.size))
    y = np.sin(X) @ BETA_TRUE + noise_sd * rng.standard_normal(n)
    return X, y


def sample_orange_shell(m, rng, max_draws=MAX_SHELL_DRAWS, batch=4096):
    """Rejection-sample ``m`` standard normal 4-vectors with squared norm in [9, 16].

    Returns ``(samples, n_proposals)``.
    """
    out = []
    have = draws = 0
    while have < m:
        if draws >= max_draws:
            raise RuntimeError(
                f"rejection sampler exceeded {max_draws} proposals for {m} samples"
            )
        size = min(batch, max_draws - draws)
        Z = rng.standard_normal((size, 4))
        r2 = np.einsum("ij,ij->i", Z, Z)
        ok = np.flatnonzero((r2 >= ORANGE_LOW) & (r2 <= ORANGE_HIGH))
        if have + ok.size >= m:
            # count proposals only up to the one that completed the sample
            last = ok[m - have - 1]
            out.append(Z[ok[: m - have]])
            draws += last + 1
            have = m
        else:
            out.append(Z[ok])
            have += ok.size
            draws += size
    return np.vstack(out) if out else np.empty((0, 4)), draws


def make_orange(n_per_class, p_noise, rng):
    inner = rng.standard_normal((n_per_class, 4))
    shell, _ = sample_orange_shell(n_per_class, rng)
    X = np.vstack([inner, shell])
    if p_noise:
        X = np.hstack([X, rng.standard_normal((2 * n_per_class, p_noise))])
    y = np.concatenate([np.ones(n_per_class), -np.ones(n_per_class)])
    order = rng.permutation(2 * n_per_class)
    return X[order], y[order]


# -- dataset-level generators --------------------------------------------------


def simulate_linear(n, seed, noise_sd=1.0) -> Dataset:
    X, y = make_linear(n, np.random.default_rng(seed), noise_sd)
    return Dataset.from_raw(X, y, Task.REGRESSION)


def simulate_sinusoid(n, seed, noise_sd=1.0) -> Dataset:
    X, y = make_sinusoid(n, np.random.default_rng(seed), noise_sd)
    return Dataset.from_raw(X, y, Task.REGRESSION)


def simulate_orange(n_per_class, p_noise, seed) -> Dataset:
    X, y = make_orange(n_per_class, p_noise, np.random.default_rng(seed))
    return Dataset.from_raw(X, y, Task.CLASSIFICATION)


def make_raw(spec: SimSpec, rng, n=None):
    """Raw ``(X, y, task)`` for a simulation; ``n`` overrides ``spec.n``.

    For the orange model ``n`` is the total row count (split evenly).
    """
    n = spec.n if n is None else n
    if spec.name == "linear":
        return (*make_linear(n, rng), Task.REGRESSION)
    if spec.name == "sinusoid":
        return (*make_sinusoid(n, rng), Task.REGRESSION)
    if n % 2:
        raise ValueError("orange simulation needs an even number of rows")
    return (*make_orange(n // 2, spec.p_noise, rng), Task.CLASSIFICATION)


def simulate(spec: SimSpec) -> Dataset:
    X, y, task = make_raw(spec, np.random.default_rng(spec.seed))
    return Dataset.from_raw(X, y, task)


# -- CSV -----------------------------------------------------------------------


def read_numeric_csv(path):
    """Header and float matrix of a rectangular numeric CSV file."""
    path = Path(path)
    with path.open(newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValueError(f"{path}: empty file")
    header = [h.strip() for h in rows[0]]
    body = [r for r in rows[1:] if r]
    if not body:
        raise ValueError(f"{path}: no data rows")
    values = np.empty((len(body), len(header)))
    for i, row in enumerate(body, start=2):
        if len(row) != len(header):
            raise ValueError(
                f"{path}: line {i} has {len(row)} fields, header has {len(header)}"
            )
        for j, cell in enumerate(row):
            try:
                values[i - 2, j] = float(cell)
            except ValueError:
                raise ValueError(
                    f"{path}: line {i}, column {header[j]!r}: non-numeric value {cell!r}"
                ) from None
    if not np.all(np.isfinite(values)):
        raise ValueError(f"{path}: non-finite values are not supported")
    return header, values


def load_csv(path, response_column="y", task=Task.REGRESSION) -> Dataset:
    """Read a numeric CSV with a header row; all non-response columns are features."""
    task = Task(task)
    header, values = read_numeric_csv(path)
    if response_column not in header:
        raise ValueError(f"{path}: missing response column {response_column!r}")
    k = header.index(response_column)
    y = values[:, k]
    X = np.delete(values, k, axis=1)
    names = [h for j, h in enumerate(header) if j != k]
    if task is Task.CLASSIFICATION:
        _check_labels(y)
    return Dataset.from_raw(X, y, task, feature_names=names)


def write_csv(path, X, y=None, feature_names=None, response_column="y"):
    """Write rows with ``repr``-exact floats, header ``x_1..x_p[,y]``."""
    X = np.asarray(X, dtype=float)
    names = list(feature_names or [f"x_{j + 1}" for j in range(X.shape[1])])
    with Path(path).open("w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(names + ([response_column] if y is not None else []))
        for i in range(X.shape[0]):
            row = [repr(float(v)) for v in X[i]]
            if y is not None:
                row.append(repr(float(y[i])))
            writer.writerow(row)
