"""s-ordered phase-space quasi-probability distributions (PQDs).

PQD values are densities with respect to d^2 alpha = dRe(alpha) dIm(alpha) per
mode.  Orderings s >= 1 (Glauber-Sudarshan) are rejected everywhere.
"""

from __future__ import annotations

import math
import threading
import warnings
from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, NamedTuple

import numpy as np
from scipy import optimize
from scipy.special import gammaln

from .errors import (
    CutoffError,
    NonConvergence,
    OrderingInfeasible,
    PositiveDefiniteViolation,
    TruncationWarning,
)
from .gaussian import GaussianState

TAIL_MASS_TOL = 1e-8


def check_ordering(s) -> None:
    s_arr = np.asarray(s, dtype=float)
    if not np.all(np.isfinite(s_arr)):
        raise ValueError("ordering parameters must be finite")
    if np.any(s_arr >= 1):
        raise OrderingInfeasible("ordering s >= 1 (Glauber-Sudarshan regime) is not supported")


def ordering_vector(s, modes: int) -> np.ndarray:
    s_arr = np.broadcast_to(np.asarray(s, dtype=float), (modes,)).copy()
    if np.any(s_arr < -1) or np.any(s_arr > 1):
        raise ValueError("ordering parameters must lie in [-1, 1]")
    return s_arr


@dataclass(frozen=True)
class GaussianComponent:
    """Isotropic complex Gaussian weight * N(center, var) with var per real component."""

    weight: float
    center: complex
    var: float

    def density(self, alpha):
        d2 = np.abs(np.asarray(alpha) - self.center) ** 2
        return self.weight * np.exp(-d2 / (2 * self.var)) / (2 * np.pi * self.var)


class PqdFunction:
    """A real quasi-probability density over m complex phase-space points.

    ``neg_volume`` and ``range`` may be passed as zero-argument callables; they are
    then computed on first access, so evaluation-only use stays cheap.
    ``envelope`` (single-mode families only) is a Gaussian mixture dominating |eval|
    pointwise; the rejection sampler draws from it.
    """

    def __init__(
        self,
        modes: int,
        eval: Callable[[np.ndarray], np.ndarray],
        neg_volume,
        range,
        envelope: tuple[GaussianComponent, ...] = (),
        center_radius: float = 0.0,
        envelope_sigma: float = 0.5,
    ):
        self.modes = modes
        self.eval = eval
        self._neg_volume = neg_volume
        self._range = range
        self.envelope = tuple(envelope)
        self.center_radius = center_radius
        self.envelope_sigma = envelope_sigma
        self._lock = threading.Lock()

    def _resolve(self, name: str):
        with self._lock:
            value = getattr(self, name)
            if callable(value):
                value = value()
                setattr(self, name, value)
            return value

    @property
    def neg_volume(self) -> float:
        return self._resolve("_neg_volume")

    @property
    def range(self) -> tuple[float, float]:
        return self._resolve("_range")

    def __call__(self, alpha):
        return self.eval(alpha)

    @property
    def max_abs(self) -> float:
        lo, hi = self.range
        return max(abs(lo), abs(hi))


@dataclass(frozen=True)
class PointOperator:
    s: float
    center: complex
    cutoff: int
    matrix: np.ndarray


# ---------------------------------------------------------------------------
# point operators


def _ladder_exponential(x: np.ndarray, cutoff: int) -> np.ndarray:
    """Batch of <m| exp(x a^dag) |k> on the first `cutoff` Fock states (exact)."""
    idx = np.arange(cutoff)
    diff = idx[:, None] - idx[None, :]
    lower = diff >= 0
    dpos = np.where(lower, diff, 0)
    logc = 0.5 * (gammaln(idx[:, None] + 1) - gammaln(idx[None, :] + 1)) - gammaln(dpos + 1)
    coef = np.where(lower, np.exp(logc), 0.0)
    return coef * np.power(x[..., None, None], dpos)


def point_operator_blocks(s: float, alpha, cutoff: int) -> np.ndarray:
    """Exact cutoff x cutoff blocks of Delta^(s)(alpha) for a batch of alpha.

    Uses D(a) q^{n} D(a)^dag = e^{lam|a|^2} exp(-lam a a^dag) q^n exp(-lam a* a) with
    q = (s+1)/(s-1), lam = q - 1; both exponentials are triangular, so truncating
    them introduces no error on the retained block.
    """
    check_ordering(s)
    alpha = np.asarray(alpha, dtype=complex)
    lam = -2.0 / (1.0 - s)
    q = (s + 1.0) / (s - 1.0)
    pref = 2.0 / (np.pi * (1.0 - s))
    X = _ladder_exponential(-lam * alpha, cutoff)
    Q = np.power(q, np.arange(cutoff))
    scale = pref * np.exp(lam * np.abs(alpha) ** 2)
    M = (X * Q[None, :]) @ np.conj(np.swapaxes(X, -1, -2))
    return scale[..., None, None] * M


def single_mode_point_operator(s: float, alpha: complex, cutoff: int) -> PointOperator:
    if cutoff < 2:
        raise CutoffError("cutoff must be at least 2")
    if not np.isfinite(alpha):
        raise ValueError("phase-space point must be finite")
    check_ordering(s)
    mat = point_operator_blocks(s, np.array([alpha]), cutoff)[0]
    return PointOperator(float(s), complex(alpha), cutoff, (mat + mat.conj().T) / 2)


def spectral_point_operator(s: float, alpha: complex, cutoff: int, work_dim: int | None = None) -> np.ndarray:
    """Delta^(s)(alpha) from displaced number states in a larger truncated space.

    Reference construction for s <= 0, where the eigenvalue series converges.
    """
    from scipy.linalg import expm

    check_ordering(s)
    d = work_dim or 4 * cutoff
    a = np.diag(np.sqrt(np.arange(1, d)), 1)
    D = expm(alpha * a.T - np.conj(alpha) * a)
    t = -s
    eig = 2 / (np.pi * (1 + t)) * ((t - 1) / (t + 1)) ** np.arange(d)
    full = (D * eig[None, :]) @ D.conj().T
    return full[:cutoff, :cutoff]


def single_mode_interval(t: float) -> tuple[float, float]:
    """Eigenvalue interval of Delta^(-t), t >= 0: bounds on W^(-t) of a state."""
    if t < 0:
        raise ValueError("interval is unbounded for t < 0")
    return -2 * (1 - t) / (np.pi * (1 + t) ** 2), 2 / (np.pi * (1 + t))


def povm_range_bound(t) -> float:
    t = np.atleast_1d(np.asarray(t, dtype=float))
    if np.any(t < 0):
        raise ValueError("range bound requires non-negative ordering parameters")
    return float(2 / (t.min() + 1) * np.prod(2 / (t + 1)))


# ---------------------------------------------------------------------------
# evaluation on Fock operators


def fock_pqd_single(matrix: np.ndarray, s: float, alpha) -> np.ndarray:
    """Tr[matrix Delta^(s)(alpha)] for a single-mode operator, vectorised over alpha."""
    alpha = np.asarray(alpha, dtype=complex)
    d = matrix.shape[0]
    if np.allclose(matrix, np.diag(np.diag(matrix)), atol=0, rtol=0):
        return _diagonal_fock_pqd(np.real(np.diag(matrix)), s, np.abs(alpha) ** 2)
    blocks = point_operator_blocks(s, alpha.ravel(), d)
    vals = np.einsum("ij,bji->b", matrix, blocks)
    return np.real(vals).reshape(alpha.shape)


def _diagonal_fock_pqd(p: np.ndarray, s: float, r: np.ndarray) -> np.ndarray:
    """sum_n p_n W^(s)_{|n>}(alpha) as a function of r = |alpha|^2."""
    check_ordering(s)
    lam = -2.0 / (1.0 - s)
    q = (s + 1.0) / (s - 1.0)
    pref = 2.0 / (np.pi * (1.0 - s))
    x = lam * lam * r
    out = np.zeros_like(r, dtype=float)
    for n, pn in enumerate(p):
        if pn == 0:
            continue
        term = np.zeros_like(out)
        for k in range(n + 1):
            c = math.exp(gammaln(n + 1) - gammaln(k + 1) - 2 * gammaln(n - k + 1))
            term += c * q**k * x ** (n - k)
        out += pn * term
    return pref * np.exp(lam * r) * out


def spqd_from_fock_operator(op, s, alpha) -> np.ndarray:
    """Tr[op (x)_j Delta^(s_j)(alpha_j)] on the truncated space.

    ``op`` needs ``matrix``, ``modes`` and ``cutoff`` attributes; ``alpha`` has a
    trailing axis of length ``modes`` (a 1-D alpha is a single point).
    """
    m, d = op.modes, op.cutoff
    if op.matrix.shape != (d**m, d**m):
        raise CutoffError(f"operator shape {op.matrix.shape} incompatible with {m} modes at cutoff {d}")
    alpha = np.asarray(alpha, dtype=complex)
    single = alpha.ndim == 1
    alpha = np.atleast_2d(alpha)
    if alpha.shape[-1] != m:
        raise CutoffError("number of phase-space coordinates differs from mode count")
    s = np.broadcast_to(np.asarray(s, dtype=float), (m,))
    check_ordering(s)
    if getattr(op, "trace_deficit", 0.0) > TAIL_MASS_TOL:
        warnings.warn(f"operator tail mass {op.trace_deficit:.2e} exceeds {TAIL_MASS_TOL}", TruncationWarning, stacklevel=2)
    batch = alpha.reshape(-1, m)
    if m == 1:
        out = fock_pqd_single(op.matrix, s[0], batch[:, 0])
    else:
        T = op.matrix.reshape((d,) * (2 * m))
        letters = "abcdefghijklmnopqrstuvw"
        rows, cols = letters[:m], letters[m:2 * m]
        expr = [rows + cols]
        operands = [T]
        for j in range(m):
            operands.append(point_operator_blocks(s[j], batch[:, j], d))
            expr.append("z" + cols[j] + rows[j])
        out = np.real(np.einsum(",".join(expr) + "->z", *operands, optimize=True))
    out = out.reshape(alpha.shape[:-1])
    return float(out[0]) if single else out


# ---------------------------------------------------------------------------
# closed-form families


def spqd_lossy_single_photon(eta: float, s: float, alpha) -> np.ndarray:
    check_ordering(s)
    r = np.abs(np.asarray(alpha, dtype=complex)) ** 2
    v = 1.0 - s
    return (2 * v * (v - 2 * eta) + 8 * eta * r) * np.exp(-2 * r / v) / (np.pi * v**3)


def negvol_lossy_single_photon(eta: float, s: float) -> float:
    check_ordering(s)
    if s <= 1 - 2 * eta:
        return 1.0
    return float(4 * eta / (1 - s) * np.exp((1 - s - 2 * eta) / (2 * eta)) - 1)


class Extrema(NamedTuple):
    origin: float
    second: float | None
    radius2: float | None
    degenerate: bool


def extrema_lossy_single_photon(eta: float, s: float) -> Extrema:
    """Extrema of W^(-s) of the lossy single photon: value at the origin and on the ring.

    The ring radius is |alpha_1|^2 = (1+s)(4 eta - 1 - s) / (4 eta), the stationary point
    of the radial profile.
    """
    check_ordering(-s)
    w0 = 2 * (1 + s - 2 * eta) / (np.pi * (1 + s) ** 2)
    if eta <= 0:
        return Extrema(float(w0), None, None, True)
    r1 = (1 + s) * (4 * eta - 1 - s) / (4 * eta)
    if r1 <= 0:
        return Extrema(float(w0), None, None, True)
    w1 = 4 * eta / (np.pi * (1 + s) ** 2) * np.exp((s + 1 - 4 * eta) / (2 * eta))
    return Extrema(float(w0), float(w1), float(r1), False)


def single_photon_range(eta: float, s: float) -> tuple[float, float]:
    """(min, max) of W^(s) of the lossy single photon."""
    ext = extrema_lossy_single_photon(eta, -s)
    vals = [ext.origin, 0.0]
    if not ext.degenerate:
        vals.append(ext.second)
    return min(vals), max(vals)


def spqd_lossy_cat(gamma: complex, eta: float, s: float, alpha) -> np.ndarray:
    check_ordering(s)
    if not 0 <= eta <= 1:
        raise ValueError("transmissivity must lie in [0, 1]")
    alpha = np.asarray(alpha, dtype=complex)
    v = 1.0 - s
    b = np.sqrt(eta) * gamma
    g2 = abs(gamma) ** 2
    lobes = np.exp(-2 * np.abs(alpha + b) ** 2 / v) + np.exp(-2 * np.abs(alpha - b) ** 2 / v)
    cross = 2 * np.real(np.exp(-2 * g2 - 2 * (alpha + b) * (np.conj(alpha) - np.conj(b)) / v))
    return (lobes + cross) / (np.pi * v * (1 + np.exp(-2 * g2)))


def spqd_gaussian(g: GaussianState, s, alpha) -> np.ndarray:
    """4^m N(r; mean, Sigma - s I) with r = (2 Re alpha_1, 2 Im alpha_1, ...)."""
    m = g.modes
    s = np.broadcast_to(np.asarray(s, dtype=float), (m,))
    check_ordering(s)
    cov = g.cov - np.diag(np.repeat(s, 2))
    ev = np.linalg.eigvalsh(cov)
    if ev.min() <= 1e-12:
        raise PositiveDefiniteViolation(f"Sigma - s I has eigenvalue {ev.min():.3g}")
    alpha = np.asarray(alpha, dtype=complex)
    single = alpha.ndim == 1
    alpha = np.atleast_2d(alpha)
    r = np.empty(alpha.shape[:-1] + (2 * m,))
    r[..., 0::2] = 2 * alpha.real
    r[..., 1::2] = 2 * alpha.imag
    d = r - g.mean
    L = np.linalg.cholesky(cov)
    z = np.linalg.solve(L, d.reshape(-1, 2 * m).T).T.reshape(d.shape)
    logdet = 2 * np.log(np.diag(L)).sum()
    log_density = -0.5 * (z**2).sum(-1) - m * np.log(2 * np.pi) - 0.5 * logdet + m * np.log(4)
    out = np.exp(log_density)
    return float(out[0]) if single else out


# ---------------------------------------------------------------------------
# quadrature


_GL_X, _GL_W = np.polynomial.legendre.leggauss(8)
_CHUNK_NODES = 1 << 21


def _polar_chunk(f, theta: np.ndarray, edges: np.ndarray, absolute: bool) -> float:
    n_theta, n_r = len(theta), len(edges) - 1
    eith = np.exp(1j * theta)[:, None]
    a = np.broadcast_to(edges[:-1], (n_theta, n_r))
    b = np.broadcast_to(edges[1:], (n_theta, n_r))
    c = b.copy()
    if absolute:
        fe = np.real(f(edges[None, :] * eith))
        flip = np.sign(fe[:, :-1]) * np.sign(fe[:, 1:]) < 0
        if flip.any():
            lo, hi = a[flip].copy(), b[flip].copy()
            ph = np.broadcast_to(eith, (n_theta, n_r))[flip]
            flo = np.real(f(lo * ph))
            for _ in range(60):
                mid = (lo + hi) / 2
                fm = np.real(f(mid * ph))
                left = np.sign(fm) == np.sign(flo)
                lo = np.where(left, mid, lo)
                flo = np.where(left, fm, flo)
                hi = np.where(left, hi, mid)
            c[flip] = (lo + hi) / 2

    def panel(lo, hi):
        half = (hi - lo) / 2
        nodes = (lo + hi)[..., None] / 2 + half[..., None] * _GL_X
        vals = np.real(f(nodes * eith[..., None]))
        if absolute:
            vals = np.abs(vals)
        return (vals * nodes * _GL_W).sum(-1) * half

    return float((panel(a, c) + panel(c, b)).sum())


def _polar_integral(f, center_radius: float, sigma: float, n_r: int, n_theta: int, absolute: bool) -> float:
    """Polar quadrature of f (or |f|) over the disc of radius center_radius + 12 sigma.

    Radial panels use 8-point Gauss-Legendre; panels whose end points differ in sign
    are split at the root (found by bisection) so |f| is smooth on every sub-panel.
    The angular rule is the periodic trapezoid rule, evaluated in memory-bounded chunks.
    """
    R = center_radius + 12 * sigma
    theta = (np.arange(n_theta) + 0.5) * 2 * np.pi / n_theta
    edges = np.linspace(0, R, n_r + 1)
    rows = max(1, _CHUNK_NODES // (16 * n_r))
    total = math.fsum(_polar_chunk(f, theta[i:i + rows], edges, absolute) for i in range(0, n_theta, rows))
    return total * 2 * np.pi / n_theta


def integrate_pqd(f, center_radius: float, sigma: float, tol: float = 1e-6, absolute: bool = False, max_level: int = 5) -> float:
    n_r, n_theta = 64, 64
    prev = _polar_integral(f, center_radius, sigma, n_r, n_theta, absolute)
    for _ in range(max_level):
        n_r, n_theta = 2 * n_r, 2 * n_theta
        cur = _polar_integral(f, center_radius, sigma, n_r, n_theta, absolute)
        if abs(cur - prev) <= tol * abs(cur):
            return cur
        prev = cur
    raise NonConvergence(f"quadrature did not converge to relative tolerance {tol}")


def negvol_numeric(p: PqdFunction, envelope_sigma: float | None = None, tol: float = 1e-6) -> float:
    """Numerical negative volume  int |W| d^2 alpha  of a single-mode PQD."""
    if p.modes != 1:
        raise ValueError("numeric negative volume is implemented for single-mode PQDs")
    sigma = p.envelope_sigma if envelope_sigma is None else envelope_sigma
    return integrate_pqd(p.eval, p.center_radius, sigma, tol=tol, absolute=True)


def numeric_extrema(f, center_radius: float, sigma: float, n: int = 241) -> tuple[float, float]:
    """Global (min, max) of a single-mode function: dense grid followed by local polishing."""
    R = center_radius + 6 * sigma
    xs = np.linspace(-R, R, n)
    Z = xs[None, :] + 1j * xs[:, None]
    vals = np.real(f(Z))
    out = []
    for sign in (1.0, -1.0):
        flat = np.argsort(sign * vals, axis=None)[:5]
        best = sign * vals.min() if sign > 0 else -vals.max()
        for i in flat:
            z0 = Z.flat[i]
            res = optimize.minimize(
                lambda v: sign * float(np.real(f(np.array(v[0] + 1j * v[1])))),
                [z0.real, z0.imag],
                method="Nelder-Mead",
                options={"xatol": 1e-10, "fatol": 1e-14, "maxiter": 2000},
            )
            best = min(best, res.fun)
        out.append(sign * best)
    lo, hi = out
    # the functions decay to zero at infinity
    return min(lo, 0.0), max(hi, 0.0)


# ---------------------------------------------------------------------------
# PqdFunction factories for single-mode families


def vacuum_pqd(s: float) -> PqdFunction:
    return thermal_pqd(0.0, s)


def thermal_pqd(nbar: float, s: float) -> PqdFunction:
    check_ordering(s)
    v = 2 * nbar + 1 - s
    if v <= 0:
        raise PositiveDefiniteViolation("thermal PQD undefined for this ordering")

    def ev(alpha):
        return 2 / (np.pi * v) * np.exp(-2 * np.abs(np.asarray(alpha)) ** 2 / v)

    return PqdFunction(1, ev, 1.0, (0.0, 2 / (np.pi * v)), (GaussianComponent(1.0, 0j, v / 4),), 0.0, math.sqrt(v / 4))


def coherent_pqd(gamma: complex, s: float) -> PqdFunction:
    check_ordering(s)
    v = 1 - s

    def ev(alpha):
        return 2 / (np.pi * v) * np.exp(-2 * np.abs(np.asarray(alpha) - gamma) ** 2 / v)

    return PqdFunction(1, ev, 1.0, (0.0, 2 / (np.pi * v)), (GaussianComponent(1.0, complex(gamma), v / 4),), abs(gamma), math.sqrt(v / 4))


def lossy_single_photon_pqd(eta: float, s: float) -> PqdFunction:
    check_ordering(s)
    v = 1 - s
    # |W| <= [2v|v - 2 eta| e^{-2r/v} + 8 eta (v/e) e^{-r/v}] / (pi v^3)
    env = []
    w_core = abs(v - 2 * eta) / v
    if w_core > 0:
        env.append(GaussianComponent(w_core, 0j, v / 4))
    if eta > 0:
        env.append(GaussianComponent(8 * eta / (math.e * v), 0j, v / 2))
    return PqdFunction(
        1,
        lambda alpha: spqd_lossy_single_photon(eta, s, alpha),
        negvol_lossy_single_photon(eta, s),
        single_photon_range(eta, s),
        tuple(env),
        0.0,
        math.sqrt(v / 2),
    )


@lru_cache(maxsize=256)
def lossy_cat_pqd(gamma: complex, eta: float, s: float, tol: float = 1e-6) -> PqdFunction:
    check_ordering(s)
    v = 1 - s
    g2 = abs(gamma) ** 2
    b = math.sqrt(eta) * gamma
    norm = 2 * (1 + math.exp(-2 * g2))
    env = [GaussianComponent(1 / norm, complex(b), v / 4), GaussianComponent(1 / norm, -complex(b), v / 4)]
    w_cross = 2 * math.exp(-2 * g2 + 2 * eta * g2 / v) / norm
    if w_cross > 0:
        env.append(GaussianComponent(w_cross, 0j, v / 4))

    def ev(alpha):
        return spqd_lossy_cat(gamma, eta, s, alpha)

    sigma = math.sqrt(v / 4)

    def nv():
        return max(1.0, integrate_pqd(ev, abs(b), sigma, tol=tol, absolute=True))

    return PqdFunction(1, ev, nv, lambda: numeric_extrema(ev, abs(b), sigma), tuple(env), abs(b), sigma)


def fock_operator_pqd(matrix: np.ndarray, s: float) -> PqdFunction:
    """Single-mode PQD of a truncated Fock matrix, with numeric metadata."""
    check_ordering(s)
    d = matrix.shape[0]

    def ev(alpha):
        return fock_pqd_single(matrix, s, alpha)

    sigma = math.sqrt(max(1 - s, 0.05) / 2)
    center = math.sqrt(d)
    return PqdFunction(
        1,
        ev,
        lambda: max(1.0, integrate_pqd(ev, center, sigma, absolute=True)),
        lambda: numeric_extrema(ev, center, sigma),
        (),
        center,
        sigma,
    )
