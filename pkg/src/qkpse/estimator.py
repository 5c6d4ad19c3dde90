"""Monte Carlo overlap estimation.

An overlap Tr[rho A] is written as an average of
E(mu) = pi^n N sign(W_rho(mu)) W_A(mu) over mu ~ |W_rho| / N, and the number of
samples is fixed up front by Hoeffding's inequality from the range of E.

Sampling is split into fixed-size blocks.  Block b draws from a generator seeded
by (seed, b) and block sums are folded in order, so results do not depend on the
number of worker threads.
"""

from __future__ import annotations

import math
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Callable, Mapping, Sequence

import numpy as np

from .errors import BudgetExceeded, GuardViolation, OrderingInfeasible, RangeViolation
from .gaussian import GaussianState, partial_overlap, partial_trace, s_max_nonneg
from .phase_space import fock_pqd_single, numeric_extrema, spqd_gaussian
from .sources import LonEncoding, interval_product, lon_range_bound, mode_pqd, sample_output, spqd_output

BLOCK_SIZE = 1 << 15
MAX_SAMPLES = 2**62
AUTO_MARGIN = 1e-3
PILOT_SAMPLES = 1000


def hoeffding_samples(range_bound: float, epsilon: float, delta: float) -> int:
    if not (0 < epsilon < 1 and 0 < delta < 1):
        raise ValueError("epsilon and delta must lie in (0, 1)")
    if not range_bound > 0:
        raise ValueError("range bound must be positive")
    n = range_bound**2 / (2 * epsilon**2) * math.log(2 / delta)
    if not n < MAX_SAMPLES:
        raise OverflowError("Hoeffding sample count exceeds 2^62")
    return math.ceil(n)


@dataclass(frozen=True)
class EstimateReport:
    value: float
    n_samples: int
    epsilon: float
    delta: float
    range_bound: float
    seed: int
    wall_seconds: float
    error_bound: float | None = None
    parts: Mapping[str, "EstimateReport"] = field(default_factory=dict)

    def as_record(self) -> dict:
        rec = {
            "estimate": self.value,
            "n_samples": self.n_samples,
            "range_bound": self.range_bound,
            "epsilon": self.epsilon,
            "delta": self.delta,
            "seed": self.seed,
            "wall_seconds": self.wall_seconds,
        }
        if self.error_bound is not None:
            rec["error_bound"] = self.error_bound
        return rec


@dataclass(frozen=True)
class OverlapProblem:
    """mu ~ |W_rho| / N via ``sampler(rng, count)``; points have shape (count, modes)."""

    sampler: Callable[[np.random.Generator, int], np.ndarray]
    sign: Callable[[np.ndarray], np.ndarray]
    neg_volume: float
    a_eval: Callable[[np.ndarray], np.ndarray]
    modes: int
    range_bound: float

    def terms(self, rng: np.random.Generator, count: int) -> np.ndarray:
        mu = self.sampler(rng, count)
        a = self.a_eval(mu)
        if np.any(~np.isfinite(a)):
            raise FloatingPointError("non-finite evaluator value")
        e = np.pi**self.modes * self.neg_volume * self.sign(mu) * a
        if e.size and e.max() - e.min() > self.range_bound * (1 + 1e-9):
            raise RangeViolation("estimator values exceed the declared range bound")
        return e


def block_rng(seed: int, block: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(block,)))


def blocked_sum(
    draw: Callable[[np.random.Generator, int], np.ndarray],
    n: int,
    seed: int,
    threads: int = 1,
    block_size: int = BLOCK_SIZE,
) -> float:
    sizes = [block_size] * (n // block_size)
    if n % block_size:
        sizes.append(n % block_size)

    def run(b: int) -> float:
        return float(np.sum(draw(block_rng(seed, b), sizes[b])))

    if threads > 1 and len(sizes) > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            sums = list(pool.map(run, range(len(sizes))))
    else:
        sums = [run(b) for b in range(len(sizes))]
    return math.fsum(sums)


def mc_overlap(
    p: OverlapProblem,
    epsilon: float,
    delta: float,
    seed: int,
    threads: int = 1,
    n_samples: int | None = None,
) -> EstimateReport:
    t0 = time.perf_counter()
    n = hoeffding_samples(p.range_bound, epsilon, delta) if n_samples is None else int(n_samples)
    total = blocked_sum(p.terms, n, seed, threads)
    return EstimateReport(total / n, n, epsilon, delta, p.range_bound, seed, time.perf_counter() - t0)


def _pilot(p: OverlapProblem, seed: int) -> tuple[float, float]:
    e = p.terms(block_rng(seed, 2**31), PILOT_SAMPLES)
    return float(e.mean()), float(e.std(ddof=1))


# ---------------------------------------------------------------------------
# problem builders


def gaussian_sampler(g: GaussianState, s) -> Callable:
    """Sampler for the non-negative s-PQD of g: r ~ N(mean, Sigma - s I), alpha = r / 2."""
    m = g.modes
    s = np.broadcast_to(np.asarray(s, dtype=float), (m,))
    cov = g.cov - np.diag(np.repeat(s, 2))
    if np.linalg.eigvalsh(cov).min() <= 0:
        raise OrderingInfeasible("sampling ordering exceeds the state's non-negativity threshold")
    L = np.linalg.cholesky(cov)

    def sample(rng: np.random.Generator, count: int) -> np.ndarray:
        r = g.mean + rng.standard_normal((count, 2 * m)) @ L.T
        return (r[:, 0::2] + 1j * r[:, 1::2]) / 2

    return sample


def _positive(mu: np.ndarray) -> np.ndarray:
    return np.ones(mu.shape[0])


def gaussian_overlap_problem(g: GaussianState, gp: GaussianState, s: float) -> OverlapProblem:
    """Tr[rho_g rho_gp] with rho at ordering s and the observable at -s."""
    m = g.modes
    cov_a = gp.cov + s * np.eye(2 * m)
    ev = np.linalg.eigvalsh(cov_a)
    if ev.min() <= 1e-12:
        raise OrderingInfeasible("observable ordering -s is infeasible for the second state")
    peak = 4**m / ((2 * np.pi) ** m * math.sqrt(np.prod(ev)))
    return OverlapProblem(
        sampler=gaussian_sampler(g, s),
        sign=_positive,
        neg_volume=1.0,
        a_eval=lambda mu: spqd_gaussian(gp, -s, mu),
        modes=m,
        range_bound=np.pi**m * peak,
    )


def lon_overlap_problem(e: LonEncoding, ep: LonEncoding, s: float) -> OverlapProblem:
    m = e.modes
    pqds = [mode_pqd(spec, s) for spec in e.inputs]
    nv = float(np.prod([p.neg_volume for p in pqds]))

    def sampler(rng, count):
        return sample_output(e, s, rng, size=count)

    def sign(mu):
        return np.sign(spqd_output(e, s, mu))

    return OverlapProblem(
        sampler=sampler,
        sign=sign,
        neg_volume=nv,
        a_eval=lambda mu: spqd_output(ep, -s, mu),
        modes=m,
        range_bound=lon_range_bound(e, s, other=ep),
    )


def auto_ordering(cov_min_eig: float) -> float:
    return min(cov_min_eig, 1.0) - AUTO_MARGIN


def algorithm1_kernel(x, xp, s, epsilon: float, delta: float, seed: int, threads: int = 1) -> EstimateReport:
    """Kernel Tr[rho(x) rho(x')] from samples of the s-PQD of rho(x)."""
    if isinstance(x, GaussianState) and isinstance(xp, GaussianState):
        if x.modes != xp.modes:
            raise ValueError("states must have equal mode counts")
        if s == "auto":
            s = auto_ordering(s_max_nonneg(x))
        problem = gaussian_overlap_problem(x, xp, float(s))
    elif isinstance(x, LonEncoding) and isinstance(xp, LonEncoding):
        if x.modes != xp.modes:
            raise ValueError("encodings must have equal mode counts")
        if s == "auto":
            from .sources import optimize_ordering

            s, _ = optimize_ordering(x, other=xp)
        problem = lon_overlap_problem(x, xp, float(s))
    else:
        raise TypeError("algorithm1_kernel needs two GaussianStates or two LonEncodings")
    return mc_overlap(problem, epsilon, delta, seed, threads)


# ---------------------------------------------------------------------------
# post-selected Gaussian encodings


def _povm_matrix(op) -> np.ndarray:
    return np.asarray(getattr(op, "matrix", op), dtype=complex)


def povm_interval(op, u: float) -> tuple[float, float]:
    """Numeric (min, max) of W^(-u) of a single-mode POVM element."""
    M = np.ascontiguousarray(_povm_matrix(op))
    return _cached_interval(M.tobytes(), M.shape[0], float(u))


@lru_cache(maxsize=256)
def _cached_interval(raw: bytes, d: int, u: float) -> tuple[float, float]:
    M = np.frombuffer(raw, dtype=complex).reshape(d, d)
    return numeric_extrema(lambda a: fock_pqd_single(M, -u, a), math.sqrt(d), math.sqrt((1 + u) / 2))


def _povm_product(povms, u: float, conj_first: int = 0):
    mats = [_povm_matrix(op) for op in povms]

    def evaluate(mu: np.ndarray) -> np.ndarray:
        out = np.ones(mu.shape[0])
        for j, M in enumerate(mats):
            a = mu[:, j]
            if j < conj_first:
                a = np.conj(a)
            out = out * fock_pqd_single(M, -u, a)
        return out

    return evaluate


def povm_overlap_problem(g: GaussianState, povms, s: float) -> OverlapProblem:
    """Tr[(Pi_1 x ... x Pi_k) rho_g] with rho_g at ordering s and the POVM at -s."""
    k = g.modes
    if len(povms) != k:
        raise ValueError("one POVM element per mode is required")
    if s < 0:
        raise OrderingInfeasible("POVM range bounds need a non-negative ordering")
    lo, hi = interval_product([povm_interval(op, s) for op in povms])
    return OverlapProblem(gaussian_sampler(g, s), _positive, 1.0, _povm_product(povms, s), k, np.pi**k * (hi - lo))


def numerator_problem(g: GaussianState, gp: GaussianState, povms, povms_p, t: float | None = None):
    """Overlap of the unnormalised post-measurement states via the partial-overlap Gaussian.

    Returns (problem, t).  The first k modes of the overlap Gaussian carry the
    transposed copy, so the first POVM product is evaluated at conjugated points.
    """
    k = len(povms)
    po = partial_overlap(g, gp, g.modes - k)
    if t is None:
        t = auto_ordering(s_max_nonneg(po.state))
    if t < 0:
        raise OrderingInfeasible("POVM range bounds need a non-negative ordering")
    lo, hi = interval_product([povm_interval(op, t) for op in list(povms) + list(povms_p)])
    evaluate = _povm_product(list(povms) + list(povms_p), t, conj_first=k)
    w = po.weight
    problem = OverlapProblem(
        sampler=gaussian_sampler(po.state, t),
        sign=_positive,
        neg_volume=1.0,
        a_eval=lambda mu: w * evaluate(mu),
        modes=2 * k,
        range_bound=np.pi ** (2 * k) * w * (hi - lo),
    )
    return problem, t


def postselected_overlap(g, gp, povms, povms_p, epsilon, delta, seed, t=None, threads=1) -> EstimateReport:
    problem, _ = numerator_problem(g, gp, povms, povms_p, t)
    return mc_overlap(problem, epsilon, delta, seed, threads)


def combine_ratio(a: float, b: float, c: float, epsilon: float, epsilon_prime: float) -> tuple[float, float]:
    """a / (b c) with the worst-case error when each input is epsilon-accurate.

    Valid when the exact a, b, c lie in [0, 1] and the exact b, c exceed epsilon_prime.
    """
    if not 0 < epsilon < epsilon_prime < 1:
        raise ValueError("need 0 < epsilon < epsilon' < 1")
    floor = epsilon_prime - epsilon
    if b <= floor or c <= floor:
        raise GuardViolation(f"denominator estimate below {floor:.3g}")
    bound = (3 + epsilon) * epsilon / (epsilon_prime**2 * (epsilon_prime - epsilon) ** 2)
    return a / (b * c), bound


def _box_error(a, b, c, ea, eb, ec) -> float:
    value = a / (b * c)
    lo = (a - ea) / ((b + eb) * (c + ec))
    hi = (a + ea) / ((b - eb) * (c - ec))
    return max(value - lo, hi - value)


def algorithm2_kernel(
    g: GaussianState,
    gp: GaussianState,
    povms,
    povms_p,
    epsilon: float,
    delta: float,
    seed: int,
    orderings=("auto", "auto", "auto"),
    threads: int = 1,
) -> EstimateReport:
    """Kernel of normalised post-measurement states as a ratio of three overlaps.

    ``povms`` act on the first k modes; the remaining modes are compared.  The
    tolerance budget is split using a pilot run: each sub-estimate gets epsilon_i
    proportional to (R_i^2 / g_i)^(1/3), where g_i is the first-order sensitivity of
    a/(bc), scaled so the sensitivities sum to 0.8 epsilon.  The report's
    ``error_bound`` is the worst case of a/(bc) over the three confidence boxes.
    """
    t0 = time.perf_counter()
    k = len(povms)
    if len(povms_p) != k or g.modes != gp.modes:
        raise ValueError("encodings must match in modes and measured modes")
    if k == 0:
        return algorithm1_kernel(g, gp, orderings[0], epsilon, delta, seed, threads)
    keep = range(k)
    red, red_p = partial_trace(g, keep), partial_trace(gp, keep)
    s_b, s_c, t = orderings
    s_b = auto_ordering(s_max_nonneg(red)) if s_b == "auto" else float(s_b)
    s_c = auto_ordering(s_max_nonneg(red_p)) if s_c == "auto" else float(s_c)
    pa, t = numerator_problem(g, gp, povms, povms_p, None if t == "auto" else float(t))
    pb = povm_overlap_problem(red, povms, s_b)
    pc = povm_overlap_problem(red_p, povms_p, s_c)
    problems = {"a": pa, "b": pb, "c": pc}

    seeds = {name: int(np.random.SeedSequence(seed, spawn_key=(i + 1,)).generate_state(1)[0]) for i, name in enumerate("abc")}
    pilots = {name: _pilot(problems[name], seeds[name]) for name in "bc"}
    lows = {}
    for name, (mean, sd) in pilots.items():
        lows[name] = mean - 3 * sd / math.sqrt(PILOT_SAMPLES)
        if lows[name] <= 0:
            raise GuardViolation(f"pilot estimate of denominator {name} is not resolved from zero")
    b_lo, c_lo = lows["b"], lows["c"]
    sens = {"a": 1 / (b_lo * c_lo), "b": 1 / b_lo, "c": 1 / c_lo}
    shape = {n: (problems[n].range_bound ** 2 / sens[n]) ** (1 / 3) for n in "abc"}
    scale = 0.8 * epsilon / sum(sens[n] * shape[n] for n in "abc")
    eps = {n: min(scale * shape[n], 0.5) for n in "abc"}

    parts = {n: mc_overlap(problems[n], eps[n], delta / 3, seeds[n], threads) for n in "abc"}
    a, b, c = (parts[n].value for n in "abc")
    for n, v in (("b", b), ("c", c)):
        if v < 2 * eps[n]:
            raise GuardViolation(f"denominator {n} = {v:.3g} is below twice its tolerance")
    value = a / (b * c)
    err = _box_error(a, b, c, eps["a"], eps["b"], eps["c"])
    return EstimateReport(
        value=value,
        n_samples=sum(p.n_samples for p in parts.values()) + 2 * PILOT_SAMPLES,
        epsilon=epsilon,
        delta=delta,
        range_bound=max(p.range_bound for p in parts.values()),
        seed=seed,
        wall_seconds=time.perf_counter() - t0,
        error_bound=err,
        parts=parts,
    )


def pattern_sum_kernel(
    patterns,
    subkernel: Callable[[tuple], EstimateReport],
    tail_bound: float,
    epsilon_total: float | None = None,
) -> EstimateReport:
    """Sum of per-pattern sub-kernels over a finite likely set plus a tail allowance."""
    t0 = time.perf_counter()
    reports = {tuple(pp): subkernel(pp) for pp in patterns}
    eps_sum = sum(r.epsilon for r in reports.values())
    if epsilon_total is not None and eps_sum > epsilon_total:
        raise BudgetExceeded(f"per-pattern tolerances sum to {eps_sum:.3g} > {epsilon_total:.3g}")
    value = math.fsum(r.value for r in reports.values())
    delta = sum(r.delta for r in reports.values())
    return EstimateReport(
        value=value,
        n_samples=sum(r.n_samples for r in reports.values()),
        epsilon=eps_sum + tail_bound,
        delta=min(delta, 1.0),
        range_bound=max((r.range_bound for r in reports.values()), default=0.0),
        seed=reports[next(iter(reports))].seed if reports else 0,
        wall_seconds=time.perf_counter() - t0,
        error_bound=eps_sum + tail_bound,
        parts={str(k): v for k, v in reports.items()},
    )
