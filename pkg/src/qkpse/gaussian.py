"""Covariance-matrix calculus for multimode Gaussian states.

Conventions used throughout the package:

* quadratures are interleaved per mode, r = (x1, p1, x2, p2, ...), with
  x = a + a^dag and p = -i(a - a^dag), so the vacuum covariance is the identity;
* a coherent state |gamma> has mean (2 Re gamma, 2 Im gamma) per mode;
* a lossless LON with transfer matrix V acts on PQDs as W_out(alpha) = W_in(alpha V),
  so coherent amplitudes (row vectors) are mapped gamma -> gamma V^dag.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import (
    PhysicalityViolation,
    SingularConditioning,
    SymmetryViolation,
)

SYMMETRY_TOL = 1e-10
PHYSICALITY_TOL = 1e-8
PINV_TOL = 1e-10
DEPTH_FLOOR = 1e-12


@dataclass(frozen=True)
class GaussianState:
    mean: np.ndarray
    cov: np.ndarray

    @property
    def modes(self) -> int:
        return self.mean.shape[0] // 2

    def mean_complex(self) -> np.ndarray:
        return (self.mean[0::2] + 1j * self.mean[1::2]) / 2


@dataclass(frozen=True)
class TransferMatrix:
    V: np.ndarray
    unitary: bool = field(init=False)

    def __post_init__(self):
        V = np.asarray(self.V, dtype=complex)
        if V.ndim != 2 or V.shape[0] != V.shape[1]:
            raise ValueError("transfer matrix must be square")
        if np.linalg.norm(V, 2) > 1 + 1e-10:
            raise ValueError("transfer matrix norm exceeds 1")
        object.__setattr__(self, "V", V)
        unitary = np.allclose(V @ V.conj().T, np.eye(len(V)), atol=1e-10, rtol=0)
        object.__setattr__(self, "unitary", bool(unitary))

    @property
    def dim(self) -> int:
        return self.V.shape[0]


def symplectic_form(m: int) -> np.ndarray:
    return np.kron(np.eye(m), np.array([[0.0, 1.0], [-1.0, 0.0]]))


def make_gaussian(mean, cov) -> GaussianState:
    mean = np.asarray(mean, dtype=float).ravel()
    cov = np.asarray(cov, dtype=float)
    n = mean.shape[0]
    if n % 2 or cov.shape != (n, n):
        raise ValueError(f"inconsistent dimensions: mean {mean.shape}, cov {cov.shape}")
    if not np.allclose(cov, cov.T, atol=SYMMETRY_TOL, rtol=0):
        raise SymmetryViolation("covariance matrix is not symmetric")
    cov = (cov + cov.T) / 2
    if np.linalg.eigvalsh(cov).min() <= 0:
        raise PhysicalityViolation("covariance matrix is not positive definite")
    uncertainty = cov + 1j * symplectic_form(n // 2)
    if np.linalg.eigvalsh(uncertainty).min() < -PHYSICALITY_TOL:
        raise PhysicalityViolation("covariance violates the uncertainty relation")
    return GaussianState(mean, cov)


def vacuum(m: int) -> GaussianState:
    return GaussianState(np.zeros(2 * m), np.eye(2 * m))


def coherent(gammas) -> GaussianState:
    g = np.atleast_1d(np.asarray(gammas, dtype=complex))
    mean = np.empty(2 * len(g))
    mean[0::2] = 2 * g.real
    mean[1::2] = 2 * g.imag
    return GaussianState(mean, np.eye(2 * len(g)))


def thermal(nbars) -> GaussianState:
    n = np.atleast_1d(np.asarray(nbars, dtype=float))
    if np.any(n < 0):
        raise ValueError("mean photon numbers must be non-negative")
    return GaussianState(np.zeros(2 * len(n)), np.diag(np.repeat(2 * n + 1, 2)))


def _rotation(phi: float) -> np.ndarray:
    c, s = np.cos(phi), np.sin(phi)
    return np.array([[c, -s], [s, c]])


def squeezed(rs, phases=None) -> GaussianState:
    """Squeezed vacua; phase 0 gives cov diag(e^{2r}, e^{-2r}) (x anti-squeezed)."""
    r = np.atleast_1d(np.asarray(rs, dtype=float))
    ph = np.zeros_like(r) if phases is None else np.atleast_1d(np.asarray(phases, float))
    cov = np.zeros((2 * len(r), 2 * len(r)))
    for j, (rj, pj) in enumerate(zip(r, ph)):
        R = _rotation(pj / 2)
        cov[2 * j:2 * j + 2, 2 * j:2 * j + 2] = R @ np.diag([np.exp(2 * rj), np.exp(-2 * rj)]) @ R.T
    return GaussianState(np.zeros(2 * len(r)), cov)


def two_mode_squeezed(lam: float) -> GaussianState:
    """sqrt(1 - lam^2) sum_n lam^n |n, n>."""
    if not 0 <= lam < 1:
        raise ValueError("two-mode squeezing parameter must lie in [0, 1)")
    c = (1 + lam**2) / (1 - lam**2)
    s = 2 * lam / (1 - lam**2)
    Z = np.diag([1.0, -1.0])
    cov = np.block([[c * np.eye(2), s * Z], [s * Z, c * np.eye(2)]])
    return GaussianState(np.zeros(4), cov)


def prepare(kind: str, **params) -> GaussianState:
    builders = {
        "vacuum": lambda: vacuum(params["m"]),
        "coherent": lambda: coherent(params["gamma"]),
        "thermal": lambda: thermal(params["nbar"]),
        "squeezed": lambda: squeezed(params["r"], params.get("phases")),
        "two_mode_squeezed": lambda: two_mode_squeezed(params["lam"]),
    }
    if kind not in builders:
        raise ValueError(f"unknown Gaussian family {kind!r}")
    return builders[kind]()


def right_action_matrix(M: np.ndarray) -> np.ndarray:
    """Real 2m x 2m matrix of the map alpha -> alpha M on interleaved quadratures."""
    M = np.asarray(M, dtype=complex)
    m = M.shape[0]
    O = np.zeros((2 * m, 2 * m))
    for j in range(m):
        for k in range(m):
            a, b = M[j, k].real, M[j, k].imag
            O[2 * k:2 * k + 2, 2 * j:2 * j + 2] = [[a, -b], [b, a]]
    return O


def apply_lon(g: GaussianState, V) -> GaussianState:
    T = V if isinstance(V, TransferMatrix) else TransferMatrix(V)
    if not T.unitary:
        raise ValueError("apply_lon requires a unitary transfer matrix")
    if T.dim != g.modes:
        raise ValueError("transfer matrix and state dimensions differ")
    O = right_action_matrix(T.V.conj().T)
    return GaussianState(O @ g.mean, O @ g.cov @ O.T)


def apply_loss(g: GaussianState, eta) -> GaussianState:
    eta = np.broadcast_to(np.asarray(eta, dtype=float), (g.modes,))
    if np.any((eta < 0) | (eta > 1)):
        raise ValueError("transmissivities must lie in [0, 1]")
    d = np.repeat(np.sqrt(eta), 2)
    cov = d[:, None] * g.cov * d[None, :] + np.diag(1 - d**2)
    return GaussianState(d * g.mean, cov)


def _quadrature_index(modes) -> np.ndarray:
    modes = np.asarray(modes, dtype=int)
    return np.stack([2 * modes, 2 * modes + 1], axis=1).ravel()


def partial_trace(g: GaussianState, keep) -> GaussianState:
    keep = sorted(set(int(k) for k in keep))
    if not keep:
        raise ValueError("partial trace must keep at least one mode")
    idx = _quadrature_index(keep)
    return GaussianState(g.mean[idx], g.cov[np.ix_(idx, idx)])


def s_max_nonneg(g: GaussianState) -> float:
    return float(np.linalg.eigvalsh(g.cov).min())


def nonclassical_depth(g: GaussianState) -> float:
    tau = (1 - s_max_nonneg(g)) / 2
    return 0.0 if tau < DEPTH_FLOOR else float(tau)


def exact_gaussian_kernel(g1: GaussianState, g2: GaussianState) -> float:
    if g1.modes != g2.modes:
        raise ValueError("kernel needs states on the same number of modes")
    S = g1.cov + g2.cov
    d = g1.mean - g2.mean
    sign, logdet = np.linalg.slogdet(S)
    assert sign > 0, "sum of covariance matrices must be positive definite"
    quad = d @ np.linalg.solve(S, d)
    return float(np.exp(g1.modes * np.log(2) - 0.5 * quad - 0.5 * logdet))


@dataclass(frozen=True)
class PartialOverlap:
    """Sub-normalised 2k-mode Gaussian operator: weight times a normalised state.

    The first k modes carry the transposed (p -> -p) copy of the first input.
    """

    state: GaussianState
    weight: float


def partial_overlap(g1: GaussianState, g2: GaussianState, m: int) -> PartialOverlap:
    """Contract the last m modes of g1 (transposed) and g2 via twin-beam projections."""
    if g1.modes != g2.modes:
        raise ValueError("partial overlap needs equal mode counts")
    n = g1.modes
    if not 1 <= m <= n:
        raise ValueError("overlap mode count must lie in [1, modes]")
    k = n - m
    T = np.tile([1.0, -1.0], n)
    mean = np.concatenate([T * g1.mean, g2.mean])
    cov = np.zeros((4 * n, 4 * n))
    cov[:2 * n, :2 * n] = T[:, None] * g1.cov * T[None, :]
    cov[2 * n:, 2 * n:] = g2.cov

    # balanced beam splitters pairing overlap mode j of each copy
    S = np.eye(4 * n)
    h = 1 / np.sqrt(2)
    for j in range(k, n):
        for quad in range(2):
            a, b = 2 * j + quad, 2 * (n + j) + quad
            S[a, a], S[a, b] = h, -h
            S[b, a], S[b, b] = h, h
    mean = S @ mean
    cov = S @ cov @ S.T

    kept = np.concatenate([_quadrature_index(range(k)), _quadrature_index(range(n, n + k))])
    # measure x on the first beam-splitter output, p on the second
    measured = np.array([2 * j for j in range(k, n)] + [2 * (n + j) + 1 for j in range(k, n)], dtype=int)
    C1 = cov[np.ix_(measured, measured)]
    ev = np.linalg.eigvalsh(C1)
    if ev.min() <= PINV_TOL * max(ev.max(), 1.0):
        raise SingularConditioning("measured quadrature block is singular")
    C1_inv = np.linalg.pinv(C1, rcond=PINV_TOL, hermitian=True)
    B = cov[np.ix_(kept, measured)]
    mu_m = mean[measured]
    cond_cov = cov[np.ix_(kept, kept)] - B @ C1_inv @ B.T
    cond_mean = mean[kept] - B @ C1_inv @ mu_m
    density_at_zero = np.exp(-0.5 * mu_m @ C1_inv @ mu_m) / np.sqrt(np.linalg.det(2 * np.pi * C1))
    weight = (2 * np.pi) ** m * density_at_zero
    cond_cov = (cond_cov + cond_cov.T) / 2
    return PartialOverlap(GaussianState(cond_mean, cond_cov), float(weight))


def haar_unitary(m: int, rng: np.random.Generator) -> np.ndarray:
    """Haar-random unitary from the QR decomposition of a complex Ginibre matrix."""
    Z = (rng.standard_normal((m, m)) + 1j * rng.standard_normal((m, m))) / np.sqrt(2)
    Q, R = np.linalg.qr(Z)
    d = np.diag(R)
    return Q * (d / np.abs(d))


def random_gaussian(m: int, rng: np.random.Generator, max_squeeze: float = 1.5) -> GaussianState:
    """Random physical state: passive-squeeze-passive acting on a random thermal state."""
    nbar = rng.uniform(0, 1.0, size=m)
    r = rng.uniform(-1, 1, size=m)
    norm = np.linalg.norm(r)
    if norm > max_squeeze:
        r *= max_squeeze / norm
    O1 = right_action_matrix(haar_unitary(m, rng))
    O2 = right_action_matrix(haar_unitary(m, rng))
    Ssq = np.diag(np.exp(np.repeat(r, 2) * np.tile([1.0, -1.0], m)))
    M = O1 @ Ssq @ O2
    cov = M @ np.diag(np.repeat(2 * nbar + 1, 2)) @ M.T
    mean = rng.normal(scale=1.0, size=2 * m)
    return GaussianState(mean, (cov + cov.T) / 2)
