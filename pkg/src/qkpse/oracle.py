"""Brute-force reference calculations in a truncated Fock space.

Multimode operators use the Kronecker ordering of np.kron: mode 0 is the most
significant index, each mode has `cutoff` levels.
"""

from __future__ import annotations

import itertools
import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from .errors import CutoffError, TruncationWarning
from .gaussian import TransferMatrix
from .permanent import ryser
from .phase_space import spqd_from_fock_operator

STATE_DEFICIT_MAX = 1e-6


@dataclass(frozen=True)
class FockOperator:
    modes: int
    cutoff: int
    matrix: np.ndarray
    trace_deficit: float = 0.0

    def __post_init__(self):
        d = self.cutoff**self.modes
        if self.matrix.shape != (d, d):
            raise CutoffError(f"matrix shape {self.matrix.shape} does not match {self.modes} modes at cutoff {self.cutoff}")

    @property
    def trace(self) -> float:
        return float(np.real(np.trace(self.matrix)))

    def purity(self) -> float:
        return float(np.real(np.vdot(self.matrix.conj().T, self.matrix)))


def projector(ket: np.ndarray) -> np.ndarray:
    return np.outer(ket, ket.conj())


def fock_ket(n: int, cutoff: int) -> np.ndarray:
    if n >= cutoff:
        raise CutoffError(f"Fock state |{n}> needs cutoff > {n}")
    v = np.zeros(cutoff, dtype=complex)
    v[n] = 1
    return v


def coherent_ket(gamma: complex, cutoff: int) -> np.ndarray:
    n = np.arange(cutoff)
    if gamma == 0:
        return fock_ket(0, cutoff)
    logmag = -abs(gamma) ** 2 / 2 + n * np.log(abs(gamma)) - 0.5 * gammaln(n + 1)
    return np.exp(logmag + 1j * n * np.angle(gamma))


def cat_ket(gamma: complex, cutoff: int) -> np.ndarray:
    """Even cat (|gamma> + |-gamma>), normalised in the untruncated space."""
    norm = math.sqrt(2 * (1 + math.exp(-2 * abs(gamma) ** 2)))
    return (coherent_ket(gamma, cutoff) + coherent_ket(-gamma, cutoff)) / norm


def squeezed_ket(r: float, phase: float, cutoff: int) -> np.ndarray:
    """Squeezed vacuum whose covariance matches gaussian.squeezed(r, phase)."""
    v = np.zeros(cutoff, dtype=complex)
    k = np.arange((cutoff + 1) // 2)
    logc = 0.5 * gammaln(2 * k + 1) - k * np.log(2) - gammaln(k + 1)
    v[2 * k] = np.exp(logc) * (np.exp(1j * phase) * np.tanh(r)) ** k / np.sqrt(np.cosh(r))
    return v


def thermal_diag(nbar: float, cutoff: int) -> np.ndarray:
    if nbar == 0:
        return np.eye(cutoff)[0]
    n = np.arange(cutoff)
    return (nbar / (1 + nbar)) ** n / (1 + nbar)


def tms_ket(lam: float, cutoff: int) -> np.ndarray:
    v = np.zeros(cutoff * cutoff, dtype=complex)
    for n in range(cutoff):
        v[n * cutoff + n] = math.sqrt(1 - lam**2) * lam**n
    return v


def _loss_kraus(eta: float, cutoff: int) -> list[np.ndarray]:
    ops = []
    for l in range(cutoff):
        K = np.zeros((cutoff, cutoff))
        for n in range(l, cutoff):
            K[n - l, n] = math.sqrt(math.comb(n, l) * eta ** (n - l) * (1 - eta) ** l)
        ops.append(K)
    return ops


def _embed(op: np.ndarray, mode: int, modes: int, cutoff: int) -> np.ndarray:
    left = np.eye(cutoff**mode)
    right = np.eye(cutoff ** (modes - mode - 1))
    return np.kron(np.kron(left, op), right)


def _single_mode_state(spec, cutoff: int) -> np.ndarray:
    kind = spec.kind
    if kind == "vacuum" or (kind == "fock" and spec.n == 0):
        rho = projector(fock_ket(0, cutoff))
    elif kind == "single_photon":
        rho = projector(fock_ket(1, cutoff))
    elif kind == "fock":
        rho = projector(fock_ket(spec.n, cutoff))
    elif kind == "coherent":
        rho = projector(coherent_ket(complex(spec.gamma), cutoff))
    elif kind == "cat":
        rho = projector(cat_ket(complex(spec.gamma), cutoff))
    elif kind == "thermal":
        rho = np.diag(thermal_diag(spec.nbar, cutoff)).astype(complex)
    else:
        raise ValueError(f"unknown input kind {kind!r}")
    if spec.eta < 1:
        rho = sum(K @ rho @ K.T for K in _loss_kraus(spec.eta, cutoff))
    return rho


def fock_density(specs, cutoff: int) -> FockOperator:
    """Tensor product of lossy single-mode inputs (duck-typed InputStateSpec list)."""
    rho = np.ones((1, 1), dtype=complex)
    deficit = 0.0
    for spec in specs:
        if spec.kind == "fock" and spec.n + 2 > cutoff:
            raise CutoffError("cutoff too small for the requested Fock state")
        r = _single_mode_state(spec, cutoff)
        d = 1 - float(np.real(np.trace(r)))
        if d > STATE_DEFICIT_MAX:
            raise CutoffError(f"cutoff {cutoff} leaves trace deficit {d:.2e}")
        deficit = max(deficit, d)
        rho = np.kron(rho, r)
    return FockOperator(len(specs), cutoff, rho, deficit)


def basis(modes: int, cutoff: int) -> list[tuple[int, ...]]:
    return list(itertools.product(range(cutoff), repeat=modes))


def lon_fock_unitary(V, modes: int, cutoff: int) -> FockOperator:
    """Fock representation of the LON with U a_k^dag U^dag = sum_j conj(V_jk) a_j^dag.

    Amplitudes are permanents of repeated-index submatrices.  Only sectors with
    total photon number below the cutoff are fully representable; higher sectors
    are left zero, so states must not populate them.
    """
    T = V if isinstance(V, TransferMatrix) else TransferMatrix(V)
    if not T.unitary:
        raise ValueError("LON transfer matrix must be unitary")
    if T.dim != modes:
        raise ValueError("transfer matrix dimension differs from mode count")
    W = T.V.conj()
    states = basis(modes, cutoff)
    index = {s: i for i, s in enumerate(states)}
    sectors: dict[int, list[tuple[int, ...]]] = {}
    for s in states:
        sectors.setdefault(sum(s), []).append(s)
    U = np.zeros((len(states), len(states)), dtype=complex)
    log_fact = [math.lgamma(n + 1) for n in range(modes * cutoff + 1)]
    for total, members in sectors.items():
        if total > exact_sector_limit(cutoff):
            continue
        for inp in members:
            cols = np.repeat(np.arange(modes), inp)
            norm_in = sum(log_fact[n] for n in inp)
            for out in members:
                rows = np.repeat(np.arange(modes), out)
                norm = math.exp(-0.5 * (norm_in + sum(log_fact[n] for n in out)))
                U[index[out], index[inp]] = ryser(W[np.ix_(rows, cols)]) * norm
    return FockOperator(modes, cutoff, U)


def exact_sector_limit(cutoff: int) -> int:
    """Largest total photon number whose sector is fully retained."""
    return cutoff - 1


def apply_unitary(rho: FockOperator, U: FockOperator) -> FockOperator:
    return FockOperator(rho.modes, rho.cutoff, U.matrix @ rho.matrix @ U.matrix.conj().T, rho.trace_deficit)


def apply_loss_kraus(rho: FockOperator, eta, cutoff: int | None = None) -> FockOperator:
    cutoff = rho.cutoff if cutoff is None else cutoff
    if cutoff != rho.cutoff:
        raise CutoffError("loss map must act at the operator's own cutoff")
    m = rho.modes
    eta = np.broadcast_to(np.asarray(eta, dtype=float), (m,))
    if np.any((eta < 0) | (eta > 1)):
        raise ValueError("transmissivities must lie in [0, 1]")
    out = rho.matrix
    t_in = np.real(np.trace(out))
    for j in range(m):
        if eta[j] == 1:
            continue
        ops = [_embed(K, j, m, cutoff) for K in _loss_kraus(float(eta[j]), cutoff)]
        out = sum(K @ out @ K.T for K in ops)
    leak = abs(np.real(np.trace(out)) - t_in)
    if leak > STATE_DEFICIT_MAX:
        warnings.warn(f"loss map leaked trace {leak:.2e}", TruncationWarning, stacklevel=2)
    return FockOperator(m, cutoff, out, rho.trace_deficit)


def partial_trace_fock(rho: FockOperator, keep) -> FockOperator:
    m, d = rho.modes, rho.cutoff
    keep = sorted(keep)
    T = rho.matrix.reshape((d,) * (2 * m))
    traced = [j for j in range(m) if j not in keep]
    letters = "abcdefghijklmnop"
    rows = list(letters[:m])
    cols = list(letters[m:2 * m])
    for j in traced:
        cols[j] = rows[j]
    out = "".join(rows[j] for j in keep) + "".join(cols[j] for j in keep)
    red = np.einsum("".join(rows) + "".join(cols) + "->" + out, T)
    k = len(keep)
    return FockOperator(k, d, red.reshape(d**k, d**k), rho.trace_deficit)


def condition_on(rho: FockOperator, povms) -> FockOperator:
    """Unnormalised Tr_{1..k}[(Pi_1 x ... x Pi_k x I) rho] for the first k modes."""
    m, d = rho.modes, rho.cutoff
    k = len(povms)
    P = np.ones((1, 1), dtype=complex)
    for op in povms:
        P = np.kron(P, np.asarray(getattr(op, "matrix", op), dtype=complex))
    if P.shape[0] != d**k:
        raise CutoffError("POVM cutoff differs from the state's cutoff")
    full = np.kron(P, np.eye(d ** (m - k)))
    return partial_trace_fock(FockOperator(m, d, full @ rho.matrix, rho.trace_deficit), range(k, m))


def tms_heralded_state(lam: float, herald_n: int, cutoff: int):
    """State of the second arm after detecting herald_n photons in the first."""
    if not 0 <= lam < 1:
        raise ValueError("two-mode squeezing parameter must lie in [0, 1)")
    if herald_n >= cutoff:
        raise CutoffError("herald photon number must be below the cutoff")
    prob = (1 - lam**2) * lam ** (2 * herald_n)
    return FockOperator(1, cutoff, projector(fock_ket(herald_n, cutoff))), prob


def tms_density(lam: float, cutoff: int) -> FockOperator:
    ket = tms_ket(lam, cutoff)
    deficit = 1 - float(np.vdot(ket, ket).real)
    return FockOperator(2, cutoff, projector(ket), deficit)


def exact_kernel(rho1: FockOperator, rho2: FockOperator) -> float:
    if rho1.matrix.shape != rho2.matrix.shape:
        raise CutoffError("operators live on different truncated spaces")
    t1, t2 = rho1.trace, rho2.trace
    if t1 <= 0 or t2 <= 0:
        raise ValueError("kernel undefined for zero-trace operators")
    return float(np.real(np.vdot(rho1.matrix.conj().T, rho2.matrix))) / (t1 * t2)


def pqd_check(rho: FockOperator, s, alpha):
    return spqd_from_fock_operator(rho, s, alpha)


def quadrature_moments(rho: FockOperator) -> tuple[np.ndarray, np.ndarray]:
    """Mean and symmetrised covariance of (x1, p1, ...) with x = a + a^dag."""
    m, d = rho.modes, rho.cutoff
    a = np.diag(np.sqrt(np.arange(1, d)), 1)
    quads = []
    for j in range(m):
        aj = _embed(a, j, m, d)
        quads += [aj + aj.conj().T, -1j * (aj - aj.conj().T)]
    R = rho.matrix / rho.trace
    mean = np.array([np.real(np.trace(R @ q)) for q in quads])
    cov = np.empty((2 * m, 2 * m))
    for i, qi in enumerate(quads):
        for j, qj in enumerate(quads):
            cov[i, j] = np.real(np.trace(R @ (qi @ qj + qj @ qi))) / 2 - mean[i] * mean[j]
    return mean, cov
