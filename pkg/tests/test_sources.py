import math

import numpy as np
import pytest
from scipy import integrate, stats

from qkpse import gaussian as G
from qkpse import oracle as O
from qkpse.errors import RejectionStall
from qkpse.phase_space import GaussianComponent, PqdFunction, negvol_lossy_single_photon
from qkpse.sources import (
    InputStateSpec,
    LonEncoding,
    lon_range_bound,
    mode_pqd,
    optimize_ordering,
    sample_mode,
    sample_output,
    spqd_output,
)


def photons(m, eta, V):
    return LonEncoding([InputStateSpec("single_photon", eta=eta)] * m, V)


def test_input_validation():
    with pytest.raises(ValueError):
        InputStateSpec("squeezed")
    with pytest.raises(ValueError):
        InputStateSpec("single_photon", eta=1.2)
    with pytest.raises(ValueError):
        InputStateSpec("fock", n=2)
    with pytest.raises(ValueError):
        InputStateSpec("thermal", nbar=-0.1)
    with pytest.raises(ValueError):
        LonEncoding([InputStateSpec("vacuum")], 0.5 * np.eye(1))
    with pytest.raises(ValueError):
        LonEncoding([InputStateSpec("vacuum")] * 2, np.eye(3))


def test_vacuum_output_at_origin():
    e = LonEncoding([InputStateSpec("vacuum")] * 3, np.eye(3))
    assert spqd_output(e, 0.0, np.zeros(3)) == pytest.approx((2 / np.pi) ** 3)
    assert spqd_output(e, -1.0, np.zeros(3)) == pytest.approx(np.pi**-3)


@pytest.mark.parametrize("s", [-0.5, 0.0])
def test_output_pqd_matches_fock_oracle(s):
    rng = np.random.default_rng(21)
    V = G.haar_unitary(2, rng)
    specs = [InputStateSpec("single_photon", eta=0.7), InputStateSpec("coherent", gamma=0.3 - 0.2j)]
    e = LonEncoding(specs, V)
    d = 12
    rho = O.apply_unitary(O.fock_density(specs, d), O.lon_fock_unitary(V, 2, d))
    pts = rng.normal(scale=0.6, size=(5, 2)) + 1j * rng.normal(scale=0.6, size=(5, 2))
    assert np.allclose(spqd_output(e, s, pts), O.pqd_check(rho, s, pts), atol=1e-7)


def test_thermal_samples_have_expected_moments():
    nbar, s = 0.8, 0.3
    e = LonEncoding([InputStateSpec("thermal", nbar=nbar), InputStateSpec("coherent", gamma=1 + 0.5j)], np.eye(2))
    a = sample_output(e, s, 3, size=40000)
    var = (2 * nbar + 1 - s) / 4
    assert np.var(a[:, 0].real) == pytest.approx(var, rel=0.03)
    assert np.var(a[:, 1].imag) == pytest.approx((1 - s) / 4, rel=0.03)
    assert np.mean(a[:, 1]) == pytest.approx(1 + 0.5j, abs=0.01)


def test_output_samples_rotate_with_the_network(rng):
    V = G.haar_unitary(2, rng)
    gam = np.array([0.8, -0.4j])
    e = LonEncoding([InputStateSpec("coherent", gamma=g) for g in gam], V)
    a = sample_output(e, 0.0, 5, size=40000)
    assert np.allclose(a.mean(0), gam @ V.conj().T, atol=0.01)


@pytest.mark.parametrize("eta,s", [(0.5, 0.0), (0.8, 0.2), (0.9, -0.4)])
def test_single_photon_sampler_radial_law(eta, s):
    p = mode_pqd(InputStateSpec("single_photon", eta=eta), s)
    z = sample_mode(p, np.random.default_rng(8), 4000)

    r = np.linspace(0, 12, 24001)
    dens = 2 * np.pi * r * np.abs(p.eval(r + 0j)) / p.neg_volume
    table = integrate.cumulative_trapezoid(dens, r, initial=0)
    assert table[-1] == pytest.approx(1.0, abs=1e-6)

    def cdf(x):
        return np.interp(x, r, table)

    assert stats.kstest(np.abs(z), cdf).pvalue > 1e-3


def test_sampler_detects_bad_envelope():
    target = GaussianComponent(1.0, 0j, 1.0)
    p = PqdFunction(1, target.density, 1.0, (0.0, 1.0), envelope=(GaussianComponent(1.0, 0j, 0.1),))
    with pytest.raises(RejectionStall):
        sample_mode(p, np.random.default_rng(0), 100)


def test_photon_range_bound_examples():
    rng = np.random.default_rng(1)
    e = photons(2, 0.5, G.haar_unitary(2, rng))
    assert mode_pqd(e.inputs[0], 0.0).neg_volume == 1.0
    assert lon_range_bound(e, 0.0) <= 1.0
    for m in range(1, 7):
        e = photons(m, 0.85, G.haar_unitary(m, rng))
        assert lon_range_bound(e, 0.3) <= 2.0


def test_range_bound_ignores_network(rng):
    bounds = {round(lon_range_bound(photons(3, 0.6, G.haar_unitary(3, rng)), 0.1), 12) for _ in range(5)}
    assert len(bounds) == 1


def test_range_bound_bounds_estimator_terms():
    rng = np.random.default_rng(2)
    e, ep = photons(2, 0.7, G.haar_unitary(2, rng)), photons(2, 0.7, G.haar_unitary(2, rng))
    s = 0.2
    R = lon_range_bound(e, s, ep)
    a = sample_output(e, s, 9, size=20000)
    N = negvol_lossy_single_photon(0.7, s) ** 2
    vals = np.pi**2 * N * np.sign(spqd_output(e, s, a)) * spqd_output(ep, -s, a)
    assert vals.max() - vals.min() <= R + 1e-12


def test_optimize_ordering_prefers_zero_for_half_transmission():
    rng = np.random.default_rng(1)
    e = photons(2, 0.5, G.haar_unitary(2, rng))
    s, b = optimize_ordering(e, grid=[-0.5, 0.0, 0.5])
    assert s == 0.0
    assert b == pytest.approx(lon_range_bound(e, 0.0))
    with pytest.raises(ValueError):
        optimize_ordering(e, grid=[1.0])


def test_output_negative_volume_factorises():
    rng = np.random.default_rng(12)
    eta, s = 0.6, 0.3
    e = photons(2, eta, G.haar_unitary(2, rng))
    n = 400000
    scale = 1.0
    z = rng.normal(scale=scale, size=(n, 2)) + 1j * rng.normal(scale=scale, size=(n, 2))
    q = np.prod(np.exp(-np.abs(z) ** 2 / (2 * scale**2)) / (2 * np.pi * scale**2), axis=1)
    w = np.abs(spqd_output(e, s, z)) / q
    est, err = w.mean(), w.std() / math.sqrt(n)
    assert abs(est - negvol_lossy_single_photon(eta, s) ** 2) < 4 * err
