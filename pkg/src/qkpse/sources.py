"""Product input states sent through lossy linear optical networks.

Loss acts on the inputs, so the output s-PQD is a product of single-mode PQDs
evaluated at beta = alpha V.  Sampling draws each beta_k from |W_k| / N_k and
maps back with alpha = beta V^dag.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import OrderingInfeasible, RejectionStall
from .gaussian import TransferMatrix
from .phase_space import (
    PqdFunction,
    check_ordering,
    coherent_pqd,
    lossy_cat_pqd,
    lossy_single_photon_pqd,
    thermal_pqd,
)

KINDS = ("vacuum", "single_photon", "cat", "coherent", "thermal", "fock")
MIN_ACCEPTANCE = 1e-4
DEFAULT_GRID = np.linspace(-0.95, 0.95, 41)


@dataclass(frozen=True)
class InputStateSpec:
    kind: str
    eta: float = 1.0
    gamma: complex = 0j
    nbar: float = 0.0
    n: int = 1

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown input kind {self.kind!r}")
        if not 0 <= self.eta <= 1:
            raise ValueError("transmissivity must lie in [0, 1]")
        if not (np.isfinite(self.gamma) and np.isfinite(self.nbar)) or self.nbar < 0:
            raise ValueError("input parameters must be finite")
        if self.kind == "fock" and self.n not in (0, 1):
            raise ValueError("fock inputs with n >= 2 are only available through the oracle")


@dataclass(frozen=True)
class LonEncoding:
    inputs: tuple[InputStateSpec, ...]
    V: TransferMatrix

    def __post_init__(self):
        V = self.V if isinstance(self.V, TransferMatrix) else TransferMatrix(self.V)
        object.__setattr__(self, "V", V)
        object.__setattr__(self, "inputs", tuple(self.inputs))
        if not V.unitary:
            raise ValueError("encoding transfer matrix must be unitary")
        if len(self.inputs) != V.dim:
            raise ValueError("number of inputs differs from transfer-matrix dimension")

    @property
    def modes(self) -> int:
        return len(self.inputs)


def mode_pqd(spec: InputStateSpec, s: float) -> PqdFunction:
    """s-PQD of the single-mode input after its loss channel."""
    check_ordering(s)
    eta = spec.eta
    if spec.kind == "vacuum" or (spec.kind == "fock" and spec.n == 0):
        return thermal_pqd(0.0, s)
    if spec.kind in ("single_photon", "fock"):
        return lossy_single_photon_pqd(eta, s)
    if spec.kind == "coherent":
        return coherent_pqd(np.sqrt(eta) * complex(spec.gamma), s)
    if spec.kind == "thermal":
        return thermal_pqd(eta * spec.nbar, s)
    return lossy_cat_pqd(complex(spec.gamma), eta, s)


def spqd_output(e: LonEncoding, s: float, alpha) -> np.ndarray:
    alpha = np.asarray(alpha, dtype=complex)
    beta = alpha @ e.V.V
    out = np.ones(beta.shape[:-1])
    for k, spec in enumerate(e.inputs):
        out = out * mode_pqd(spec, s).eval(beta[..., k])
    return out if alpha.ndim > 1 else float(out)


def sample_mode(p: PqdFunction, rng: np.random.Generator, count: int) -> np.ndarray:
    """Rejection sampling from |p| / N with p's Gaussian-mixture envelope."""
    comps = p.envelope
    w = np.array([c.weight for c in comps])
    total = w.sum()
    out = np.empty(count, dtype=complex)
    filled = drawn = 0
    while filled < count:
        batch = max(64, int(1.2 * (count - filled) * total / p.neg_volume) + 16)
        which = rng.choice(len(comps), size=batch, p=w / total)
        centers = np.array([c.center for c in comps])[which]
        sd = np.sqrt(np.array([c.var for c in comps]))[which]
        z = centers + sd * (rng.standard_normal(batch) + 1j * rng.standard_normal(batch))
        env = sum(c.density(z) for c in comps)
        target = np.abs(p.eval(z))
        if np.any(target > env * (1 + 1e-9)):
            raise RejectionStall("envelope does not dominate the target density")
        keep = z[rng.random(batch) * env < target]
        take = min(len(keep), count - filled)
        out[filled:filled + take] = keep[:take]
        filled += take
        drawn += batch
        if drawn > 1e5 and filled < MIN_ACCEPTANCE * drawn:
            raise RejectionStall(f"acceptance rate {filled / drawn:.2e} below {MIN_ACCEPTANCE}")
    return out


def sample_output(e: LonEncoding, s: float, seed, size: int | None = None) -> np.ndarray:
    """Phase-space points alpha distributed as |W^(s)_out| / N (shape (size, m))."""
    rng = seed if isinstance(seed, np.random.Generator) else np.random.default_rng(seed)
    count = 1 if size is None else size
    beta = np.stack([sample_mode(mode_pqd(spec, s), rng, count) for spec in e.inputs], axis=-1)
    alpha = beta @ e.V.V.conj().T
    return alpha[0] if size is None else alpha


def interval_product(intervals) -> tuple[float, float]:
    lo, hi = 1.0, 1.0
    for a, b in intervals:
        c = (lo * a, lo * b, hi * a, hi * b)
        lo, hi = min(c), max(c)
    return lo, hi


def lon_range_bound(e: LonEncoding, s: float, other: LonEncoding | None = None) -> float:
    """Interval length of the estimator pi^m N sign(W^(s)) W^(-s)_other.

    Returns the smaller of 2 prod_k pi N_k max|W^(-s)_k| and, when every input
    PQD is non-negative, the exact interval-product length.  Neither depends on V.
    """
    check_ordering(s)
    check_ordering(-s)
    other = e if other is None else other
    if other.modes != e.modes:
        raise ValueError("encodings must have equal mode counts")
    nv = [mode_pqd(spec, s).neg_volume for spec in e.inputs]
    ranges = [mode_pqd(spec, -s).range for spec in other.inputs]
    m = e.modes
    generic = 2.0
    for n_k, (lo, hi) in zip(nv, ranges):
        generic *= np.pi * n_k * max(abs(lo), abs(hi))
    if all(n_k == 1.0 for n_k in nv):
        lo, hi = interval_product(ranges)
        return float(min(generic, np.pi**m * (hi - lo)))
    return float(generic)


def optimize_ordering(e: LonEncoding, grid: Sequence[float] | None = None, other: LonEncoding | None = None):
    """Grid point minimising lon_range_bound; ties go to the larger s."""
    grid = DEFAULT_GRID if grid is None else np.asarray(grid, dtype=float)
    if np.any(np.abs(grid) >= 1):
        raise ValueError("ordering grid must lie inside (-1, 1)")
    best = None
    errors = []
    for s in sorted(grid, reverse=True):
        try:
            b = lon_range_bound(e, float(s), other)
        except (ValueError, ArithmeticError) as exc:
            errors.append(exc)
            continue
        if best is None or b < best[1]:
            best = (float(s), b)
    if best is None:
        raise OrderingInfeasible(f"range bound failed at every grid point: {errors[0]}")
    return best
