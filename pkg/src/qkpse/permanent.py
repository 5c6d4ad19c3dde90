"""Randomised permanent estimation and the lossy single-photon kernel.

Inputs are single photons sent through per-mode loss eta_j and a LON.  The kernel
between two encodings reduces to an average of |Per|^2 over matched loss patterns,
which the Glynn estimator samples without ever computing a permanent.
"""

from __future__ import annotations

import time
from dataclasses import dataclass
from math import comb

import numpy as np

from .estimator import EstimateReport, blocked_sum, hoeffding_samples
from .gaussian import TransferMatrix

NORM_TOL = 1e-8
RYSER_MAX = 12


def ryser(A) -> complex:
    """Exact permanent by Ryser's formula with Gray-code subset updates."""
    A = np.asarray(A, dtype=complex)
    n = A.shape[0]
    if A.shape != (n, n):
        raise ValueError("permanent needs a square matrix")
    if n == 0:
        return 1.0 + 0j
    if n > RYSER_MAX:
        raise ValueError(f"exact permanent limited to n <= {RYSER_MAX}")
    row_sums = np.zeros(n, dtype=complex)
    total = 0j
    in_set = np.zeros(n, dtype=bool)
    size = 0
    for i in range(1, 2**n):
        j = (i & -i).bit_length() - 1
        if in_set[j]:
            row_sums -= A[:, j]
            size -= 1
        else:
            row_sums += A[:, j]
            size += 1
        in_set[j] = not in_set[j]
        total += (-1) ** size * np.prod(row_sums)
    return (-1) ** n * total


def _check_norm(W: np.ndarray) -> None:
    if W.size and np.linalg.norm(W, 2) > 1 + NORM_TOL:
        raise ValueError("Glynn estimator requires operator norm <= 1")


def glynn_terms(W: np.ndarray, rng: np.random.Generator, count: int) -> np.ndarray:
    """Real parts of `count` independent Glynn samples; each lies in [-||W||^n, ||W||^n]."""
    n = W.shape[0]
    if n == 0:
        return np.ones(count)
    y = rng.choice(np.array([-1.0, 1.0]), size=(count, n))
    rows = y @ W.T
    return np.real(np.prod(y, axis=1) * np.prod(rows, axis=1))


def glynn_estimate(W, N: int, seed) -> float:
    W = np.asarray(W, dtype=complex)
    _check_norm(W)
    if W.shape[0] < 1:
        raise ValueError("Glynn estimator needs a non-empty matrix")
    rng = np.random.default_rng(seed)
    return float(glynn_terms(W, rng, N).mean())


@dataclass(frozen=True)
class LossPattern:
    p: np.ndarray
    q: np.ndarray

    @property
    def matched(self) -> bool:
        return int(self.p.sum()) == int(self.q.sum())

    @property
    def n(self) -> int | None:
        return int(self.p.sum()) if self.matched else None


def sample_loss_pattern(eta, seed) -> LossPattern:
    """Independent bits with Pr[photon survives] = eta_j for both encodings."""
    eta = np.atleast_1d(np.asarray(eta, dtype=float))
    rng = np.random.default_rng(seed)
    p = (rng.random(eta.shape) < eta).astype(int)
    q = (rng.random(eta.shape) < eta).astype(int)
    return LossPattern(p, q)


def match_probability(m: int, eta: float) -> float:
    """theta = sum_n C(m,n)^2 eta^2n (1-eta)^2(m-n), the chance both patterns share a weight."""
    return sum(comb(m, n) ** 2 * eta ** (2 * n) * (1 - eta) ** (2 * (m - n)) for n in range(m + 1))


def fixed_weight_bits(m: int, n: int, rng: np.random.Generator) -> np.ndarray:
    """Uniform m-bit string of weight n, built one position at a time."""
    bits = np.zeros(m, dtype=int)
    need = n
    for j in range(m):
        if rng.random() * (m - j) < need:
            bits[j] = 1
            need -= 1
    return bits


def sample_uniform_eta(m: int, eta: float, seed):
    """Uniform-loss sampler: halt with probability 1 - theta, else a matched pattern.

    Returns (halted, pattern); pattern is None when halted.
    """
    if not 0 < eta <= 1:
        raise ValueError("uniform transmissivity must lie in (0, 1]")
    rng = np.random.default_rng(seed)
    weights = np.array([comb(m, n) ** 2 * eta ** (2 * n) * (1 - eta) ** (2 * (m - n)) for n in range(m + 1)])
    theta = weights.sum()
    if rng.random() >= theta:
        return True, None
    n = int(rng.choice(m + 1, p=weights / theta))
    return False, LossPattern(fixed_weight_bits(m, n, rng), fixed_weight_bits(m, n, rng))


def reduced_matrix(V, lp: LossPattern) -> np.ndarray:
    """W = V_n (+) conj(V_n), with V_n keeping rows where p=1 and columns where q=1."""
    if not lp.matched:
        raise ValueError("loss pattern weights differ; the term vanishes")
    V = V.V if isinstance(V, TransferMatrix) else np.asarray(V, dtype=complex)
    Vn = V[np.ix_(lp.p.astype(bool), lp.q.astype(bool))]
    n = Vn.shape[0]
    W = np.zeros((2 * n, 2 * n), dtype=complex)
    W[:n, :n] = Vn
    W[n:, n:] = Vn.conj()
    return W


def _kernel_terms(V: np.ndarray, eta: np.ndarray, uniform: bool):
    """Per-repeat sampler: pattern draw, mismatch -> 0, else one Glynn sample."""
    m = V.shape[0]

    def draw(rng: np.random.Generator, count: int) -> np.ndarray:
        out = np.zeros(count)
        if uniform:
            e = float(eta[0])
            weights = np.array([comb(m, n) ** 2 * e ** (2 * n) * (1 - e) ** (2 * (m - n)) for n in range(m + 1)])
            theta = weights.sum()
            live = rng.random(count) < theta
            ns = rng.choice(m + 1, size=count, p=weights / theta)
            P = np.zeros((count, m), dtype=int)
            Q = np.zeros((count, m), dtype=int)
            for i in np.flatnonzero(live):
                P[i] = fixed_weight_bits(m, ns[i], rng)
                Q[i] = fixed_weight_bits(m, ns[i], rng)
        else:
            P = (rng.random((count, m)) < eta).astype(int)
            Q = (rng.random((count, m)) < eta).astype(int)
            live = P.sum(1) == Q.sum(1)
        weight = P.sum(1)
        for n in np.unique(weight[live]):
            sel = np.flatnonzero(live & (weight == n))
            if n == 0:
                out[sel] = 1.0
                continue
            rows = np.nonzero(P[sel])[1].reshape(len(sel), n)
            cols = np.nonzero(Q[sel])[1].reshape(len(sel), n)
            Vn = V[rows[:, :, None], cols[:, None, :]]
            y1 = rng.choice(np.array([-1.0, 1.0]), size=(len(sel), n))
            y2 = rng.choice(np.array([-1.0, 1.0]), size=(len(sel), n))
            t1 = np.prod(y1, 1) * np.prod(np.einsum("bij,bj->bi", Vn, y1), 1)
            t2 = np.prod(y2, 1) * np.prod(np.einsum("bij,bj->bi", Vn.conj(), y2), 1)
            out[sel] = np.real(t1 * t2)
        if np.any(np.abs(out) > 1 + 1e-9):
            raise RuntimeError("Glynn repeat left [-1, 1]")
        return out

    return draw


def lossy_photonic_kernel(
    VX,
    VXp,
    eta,
    N: int | None = None,
    seed: int = 0,
    epsilon: float = 0.05,
    delta: float = 0.05,
    uniform: bool | None = None,
    threads: int = 1,
) -> EstimateReport:
    """Estimate Tr[rho(x) rho(x')] for lossy single photons through LONs V(x), V(x').

    Each repeat lies in [-1, 1], so the default repeat count is Hoeffding-sized with
    range 2.  ``uniform`` selects the theta-gated sampler (default: when all eta agree).
    """
    t0 = time.perf_counter()
    VX = VX if isinstance(VX, TransferMatrix) else TransferMatrix(VX)
    VXp = VXp if isinstance(VXp, TransferMatrix) else TransferMatrix(VXp)
    if not (VX.unitary and VXp.unitary):
        raise ValueError("encoding transfer matrices must be unitary")
    m = VX.dim
    eta = np.broadcast_to(np.asarray(eta, dtype=float), (m,)).copy()
    if np.any((eta < 0) | (eta > 1)):
        raise ValueError("transmissivities must lie in [0, 1]")
    V = VX.V.conj().T @ VXp.V
    if uniform is None:
        uniform = bool(np.all(eta == eta[0]) and eta[0] > 0)
    range_bound = 2.0
    n = N if N is not None else hoeffding_samples(range_bound, epsilon, delta)
    total = blocked_sum(_kernel_terms(V, eta, uniform), n, seed, threads)
    return EstimateReport(
        value=total / n,
        n_samples=n,
        epsilon=epsilon,
        delta=delta,
        range_bound=range_bound,
        seed=seed,
        wall_seconds=time.perf_counter() - t0,
    )
