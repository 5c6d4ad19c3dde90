"""Kernel ridge regression on top of any (estimated) kernel."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Any, Callable, Sequence

import numpy as np

PSD_FLOOR = -1e-6
RESIDUAL_TOL = 1e-10


@dataclass(frozen=True)
class Dataset:
    points: Sequence[Any]
    targets: np.ndarray

    def __post_init__(self):
        y = np.asarray(self.targets, dtype=float)
        object.__setattr__(self, "targets", y)
        if len(self.points) != len(y) or len(y) < 1:
            raise ValueError("dataset needs equally many (>= 1) points and targets")


@dataclass(frozen=True)
class RidgeModel:
    alphas: np.ndarray
    lam: float
    points: Sequence[Any] = ()


class KernelEvaluationError(RuntimeError):
    pass


def kernel_matrix(d: Dataset, kernel: Callable[[Any, Any], float], threads: int = 1) -> np.ndarray:
    n = len(d.points)
    pairs = [(i, j) for i in range(n) for j in range(i, n)]

    def entry(ij):
        i, j = ij
        try:
            return float(kernel(d.points[i], d.points[j]))
        except Exception as exc:
            raise KernelEvaluationError(f"kernel failed at ({i}, {j}): {exc}") from exc

    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            values = list(pool.map(entry, pairs))
    else:
        values = [entry(ij) for ij in pairs]
    K = np.zeros((n, n))
    for (i, j), v in zip(pairs, values):
        K[i, j] = K[j, i] = v
    return K


def ridge_fit(K, y, lam: float, points: Sequence[Any] = (), project: bool = True) -> RidgeModel:
    """Solve (K + n lam I) alpha = y for the squared-loss representer coefficients.

    With ``project`` the symmetrised K has negative eigenvalues set to zero;
    otherwise eigenvalues below -1e-6 are an error.
    """
    if not lam > 0:
        raise ValueError("regularisation must be positive")
    K = np.asarray(K, dtype=float)
    y = np.asarray(y, dtype=float)
    n = len(y)
    if K.shape != (n, n):
        raise ValueError("kernel matrix and targets differ in size")
    K = (K + K.T) / 2
    w, Q = np.linalg.eigh(K)
    if w.min() < PSD_FLOOR and not project:
        raise np.linalg.LinAlgError(f"kernel matrix has eigenvalue {w.min():.3g}; project it onto the PSD cone")
    w = np.maximum(w, 0.0)
    alphas = Q @ ((Q.T @ y) / (w + n * lam))
    A = (Q * w) @ Q.T + n * lam * np.eye(n)
    resid = np.linalg.norm(A @ alphas - y) / max(np.linalg.norm(y), 1e-300)
    if resid > RESIDUAL_TOL:
        raise np.linalg.LinAlgError(f"ridge solve residual {resid:.2e}")
    return RidgeModel(alphas, float(lam), tuple(points))


def predict(model: RidgeModel, kernel_row) -> float:
    row = np.asarray(kernel_row, dtype=float)
    if row.shape != model.alphas.shape:
        raise ValueError("kernel row length differs from the number of training points")
    return float(row @ model.alphas)
