"""End-to-end acceptance checks, one test per criterion.

Each test records a summary line that is printed at the end of the session.
Criteria 4, 6 and 8 are run once and reused by the failure-rate check.
"""

import math
import time
from functools import cache

import numpy as np
import pytest

from qkpse import estimator as E
from qkpse import gaussian as G
from qkpse import oracle as O
from qkpse import permanent as P
from qkpse.phase_space import (
    coherent_pqd,
    fock_operator_pqd,
    integrate_pqd,
    lossy_cat_pqd,
    lossy_single_photon_pqd,
    negvol_lossy_single_photon,
    negvol_numeric,
    povm_range_bound,
    spqd_lossy_single_photon,
    thermal_pqd,
)
from qkpse.sources import InputStateSpec, LonEncoding, lon_range_bound, mode_pqd

pytestmark = pytest.mark.slow

EPS, DELTA = 0.05, 0.05


def allowed_failure_rate(delta, runs):
    return delta + 3 * math.sqrt(delta * (1 - delta) / runs)


def per_mode_factor(spec, s):
    lo, hi = mode_pqd(spec, -s).range
    return math.pi * mode_pqd(spec, s).neg_volume * max(abs(lo), abs(hi))


def lon_oracle(V1, V2, specs):
    m = len(specs)
    d = m + 1
    rho = O.fock_density(specs, d)
    r1 = O.apply_unitary(rho, O.lon_fock_unitary(V1, m, d))
    r2 = O.apply_unitary(rho, O.lon_fock_unitary(V2, m, d))
    return O.exact_kernel(r1, r2)


def test_c01_single_photon_range_bound(criterion):
    criterion["name"] = "1  single-photon range bound"
    t0 = time.perf_counter()
    rng = np.random.default_rng(1)
    half = InputStateSpec("single_photon", eta=0.5)
    assert mode_pqd(half, 0.0).neg_volume == 1.0
    f_half = per_mode_factor(half, 0.0)
    assert f_half <= 1.0
    assert lon_range_bound(LonEncoding([half] * 2, G.haar_unitary(2, rng)), 0.0) <= 1.0
    spec = InputStateSpec("single_photon", eta=0.85)
    bounds = [lon_range_bound(LonEncoding([spec] * m, G.haar_unitary(m, rng)), 0.3) for m in range(1, 7)]
    assert max(bounds) <= 2.0
    elapsed = time.perf_counter() - t0
    criterion["detail"] = f"factor(0.5,0)={f_half:.4f} max R(0.85,0.3)={max(bounds):.4f} t={elapsed:.2f}s"
    assert elapsed < 1.0


def test_c02_cat_range_bound(criterion):
    criterion["name"] = "2  cat-state range bound"
    t0 = time.perf_counter()
    gamma, eta, s = 4.0, 0.8, 0.1
    p = lossy_cat_pqd(gamma, eta, s, tol=1e-4)
    q = lossy_cat_pqd(gamma, eta, -s, tol=1e-4)
    lo, hi = q.range
    factor = math.pi * p.neg_volume * max(abs(lo), abs(hi))
    R = 2 * factor
    elapsed = time.perf_counter() - t0
    criterion["detail"] = f"N={p.neg_volume:.5f} factor={factor:.4f} R={R:.4f} t={elapsed:.2f}s"
    assert factor < 1 and R < 2
    assert elapsed < 30


def test_c03_povm_range_bound(criterion):
    criterion["name"] = "3  POVM range bound"
    for m in range(1, 9):
        assert povm_range_bound(np.zeros(m)) == 2.0 ** (m + 1)
        assert povm_range_bound(np.ones(m)) == 1.0
    criterion["detail"] = "exact at t=0 and t=1 for m=1..8"


@cache
def algorithm1_runs():
    t0 = time.perf_counter()
    rng = np.random.default_rng(20240611)
    V1, V2 = G.haar_unitary(2, rng), G.haar_unitary(2, rng)
    specs = [InputStateSpec("single_photon", eta=0.5)] * 2
    e1, e2 = LonEncoding(specs, V1), LonEncoding(specs, V2)
    exact = lon_oracle(V1, V2, specs)
    errors = np.array([E.algorithm1_kernel(e1, e2, 0.0, EPS, DELTA, seed).value - exact for seed in range(200)])
    return errors, exact, time.perf_counter() - t0


def test_c04_algorithm1(criterion):
    criterion["name"] = "4  Algorithm 1 (lossy photons, m=2)"
    errors, exact, elapsed = algorithm1_runs()
    frac = float(np.mean(np.abs(errors) <= EPS))
    criterion["detail"] = f"oracle={exact:.4f} within eps {frac:.3f} of 200 t={elapsed:.1f}s"
    assert frac >= 0.94
    assert elapsed < 300


def test_c05_exact_gaussian_kernel(criterion):
    criterion["name"] = "5  exact Gaussian kernel"
    t0 = time.perf_counter()
    d = 40
    worst = 0.0
    pairs = [
        (G.coherent([0.4 + 0.3j]), G.coherent([-0.2 + 0.1j]), O.coherent_ket(0.4 + 0.3j, d), O.coherent_ket(-0.2 + 0.1j, d)),
        (G.coherent([1.1]), G.coherent([0.5j]), O.coherent_ket(1.1, d), O.coherent_ket(0.5j, d)),
        (G.squeezed([0.5]), G.squeezed([0.2], [1.3]), O.squeezed_ket(0.5, 0.0, d), O.squeezed_ket(0.2, 1.3, d)),
        (G.squeezed([0.3], [0.7]), G.vacuum(1), O.squeezed_ket(0.3, 0.7, d), O.fock_ket(0, d)),
    ]
    for g1, g2, k1, k2 in pairs:
        diff = abs(G.exact_gaussian_kernel(g1, g2) - abs(np.vdot(k1, k2)) ** 2)
        worst = max(worst, diff)
    assert worst <= 1e-6
    rng = np.random.default_rng(5)
    closed = 0.0
    for _ in range(20):
        a, b = rng.normal(size=2) + 1j * rng.normal(size=2)
        closed = max(closed, abs(G.exact_gaussian_kernel(G.coherent([a]), G.coherent([b])) - math.exp(-abs(a - b) ** 2)))
    assert closed <= 1e-10
    elapsed = time.perf_counter() - t0
    criterion["detail"] = f"max |Fock diff|={worst:.1e} max |closed diff|={closed:.1e} t={elapsed:.2f}s"
    assert elapsed < 10


@cache
def algorithm2_runs():
    t0 = time.perf_counter()
    d = 8
    one, two = O.projector(O.fock_ket(1, d)), O.projector(O.fock_ket(2, d))
    g = G.two_mode_squeezed(0.3)
    same = np.array([E.algorithm2_kernel(g, g, [one], [one], 0.1, DELTA, seed).value for seed in range(100)])
    cross = E.algorithm2_kernel(g, g, [one], [two], 0.1, DELTA, 1000).value
    return same - 1.0, cross, time.perf_counter() - t0


def test_c06_algorithm2(criterion):
    criterion["name"] = "6  Algorithm 2 (heralded TMS)"
    errors, cross, elapsed = algorithm2_runs()
    frac = float(np.mean(np.abs(errors) <= 0.1))
    criterion["detail"] = f"within 0.1 {frac:.2f} of 100, |1>vs|2> = {cross:.4f} t={elapsed:.1f}s"
    assert frac >= 0.94
    assert abs(cross) <= 0.1
    assert elapsed < 600


def test_c07_combine_ratio(criterion):
    criterion["name"] = "7  ratio error bound"
    rng = np.random.default_rng(7)
    worst = 0.0
    for _ in range(10**4):
        eps_prime = rng.uniform(0.02, 0.98)
        eps = rng.uniform(0, 1) * eps_prime
        if eps <= 0:
            continue
        a = rng.uniform(0, 1)
        b, c = rng.uniform(eps_prime, 1, size=2)
        if b <= eps_prime or c <= eps_prime:
            continue
        pa, pb, pc = eps * rng.uniform(-1, 1, size=3)
        est, bound = E.combine_ratio(a + pa, b + pb, c + pc, eps, eps_prime)
        worst = max(worst, abs(est - a / (b * c)) / bound)
    criterion["detail"] = f"max error / bound = {worst:.4f} over 1e4 instances"
    assert worst <= 1.0


@cache
def gurvits_runs():
    t0 = time.perf_counter()
    out = {}
    for m in (2, 3):
        for eta in (0.5, 1.0):
            rng = np.random.default_rng(1000 * m + int(10 * eta))
            errs = []
            for run in range(100):
                V1, V2 = G.haar_unitary(m, rng), G.haar_unitary(m, rng)
                exact = lon_oracle(V1, V2, [InputStateSpec("single_photon", eta=eta)] * m)
                est = P.lossy_photonic_kernel(V1, V2, eta, seed=run, epsilon=EPS, delta=DELTA).value
                errs.append(est - exact)
            out[(m, eta)] = np.array(errs)
    return out, time.perf_counter() - t0


def test_c08_gurvits(criterion):
    criterion["name"] = "8  Gurvits estimator"
    runs, elapsed = gurvits_runs()
    fracs = {k: float(np.mean(np.abs(v) <= EPS)) for k, v in runs.items()}
    rng = np.random.default_rng(8)
    zmax = 0.0
    for n in range(1, 5):
        for W in (G.haar_unitary(n, rng), 0.9 * G.haar_unitary(n, rng) @ np.diag(rng.uniform(0.3, 1, n))):
            terms = P.glynn_terms(W, np.random.default_rng(n), 20000)
            sigma = terms.std(ddof=1) / math.sqrt(len(terms))
            z = abs(P.glynn_estimate(W, 20000, n) - P.ryser(W).real) / max(sigma, 1e-15)
            zmax = max(zmax, z)
    criterion["detail"] = f"min within-eps {min(fracs.values()):.2f} of 100; max Glynn z={zmax:.2f} t={elapsed:.1f}s"
    assert min(fracs.values()) >= 0.94
    assert zmax <= 3
    assert elapsed < 600


def test_c09_depth(criterion):
    criterion["name"] = "9  nonclassical depth"
    t0 = time.perf_counter()
    worst = 0.0
    for r in (0.1, 0.5, 1.2):
        g = G.squeezed([r, r / 2], [0.0, 1.0])
        tau = G.nonclassical_depth(g)
        for eta in np.linspace(0, 1, 11):
            worst = max(worst, abs(G.nonclassical_depth(G.apply_loss(g, eta)) - eta * tau))
    assert worst <= 1e-10
    rng = np.random.default_rng(9)
    for _ in range(100):
        n = int(rng.integers(2, 4))
        g1, g2 = G.random_gaussian(n, rng), G.random_gaussian(n, rng)
        keep = sorted(rng.choice(n, size=int(rng.integers(1, n)), replace=False))
        assert G.nonclassical_depth(G.partial_trace(g1, keep)) <= G.nonclassical_depth(g1) + 1e-10
        po = G.partial_overlap(g1, g2, int(rng.integers(1, n)))
        assert G.nonclassical_depth(po.state) <= max(G.nonclassical_depth(g1), G.nonclassical_depth(g2)) + 1e-10
    elapsed = time.perf_counter() - t0
    criterion["detail"] = f"loss scaling err={worst:.1e}, 100 monotone pairs t={elapsed:.2f}s"
    assert elapsed < 30


def test_c10_hoeffding_and_failure_rates(criterion):
    criterion["name"] = "10 Hoeffding count and failure rates"
    assert E.hoeffding_samples(1, 0.02, 0.05) == 4612
    a1, _, _ = algorithm1_runs()
    a2, _, _ = algorithm2_runs()
    gv, _ = gurvits_runs()
    rates = {"alg1": (float(np.mean(np.abs(a1) > EPS)), 200), "alg2": (float(np.mean(np.abs(a2) > 0.1)), 100)}
    for key, errs in gv.items():
        rates[f"gurvits{key}"] = (float(np.mean(np.abs(errs) > EPS)), 100)
    criterion["detail"] = "rates " + " ".join(f"{k}={v[0]:.3f}" for k, v in rates.items())
    for rate, runs in rates.values():
        assert rate <= allowed_failure_rate(DELTA, runs)


def test_c11_normalisation_and_negativity(criterion):
    criterion["name"] = "11 normalisation and negativity"
    two = O.projector(O.fock_ket(2, 12))
    pqds = [
        thermal_pqd(0.0, 0.5),
        thermal_pqd(1.3, -0.4),
        coherent_pqd(1 + 0.5j, 0.2),
        lossy_single_photon_pqd(1.0, 0.0),
        lossy_single_photon_pqd(0.6, 0.5),
        lossy_single_photon_pqd(0.3, -0.8),
        lossy_cat_pqd(1.5, 0.7, 0.0),
        lossy_cat_pqd(2.0, 1.0, -0.3),
        fock_operator_pqd(two, 0.0),
        fock_operator_pqd(two, -0.5),
    ]
    norm_err = max(abs(integrate_pqd(p.eval, p.center_radius, p.envelope_sigma, tol=1e-7) - 1) for p in pqds)
    assert norm_err <= 1e-4
    rng = np.random.default_rng(11)
    nv_err = 0.0
    for _ in range(20):
        eta, s = rng.uniform(0.05, 1.0), rng.uniform(-0.9, 0.9)
        closed = negvol_lossy_single_photon(eta, s)
        nv_err = max(nv_err, abs(closed - negvol_numeric(lossy_single_photon_pqd(eta, s))))
    assert nv_err <= 1e-4
    r = np.linspace(0, 8, 4001) + 0j
    checked = 0
    for eta in np.linspace(0.02, 1.0, 50):
        for s in np.linspace(-0.98, 0.98, 50):
            margin = (1 - 2 * eta) - s
            if abs(margin) < 1e-9:
                continue
            w_min = spqd_lossy_single_photon(eta, s, r).min()
            assert (w_min >= -1e-15) == (margin > 0)
            checked += 1
    criterion["detail"] = f"norm err={norm_err:.1e} negvol err={nv_err:.1e} sign grid {checked} points"
