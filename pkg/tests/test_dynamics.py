"""Quantum quenches, Wigner sampling, TWA observables, scenarios."""

import numpy as np
import pytest
import scipy.linalg

from lmglab.errors import ConfigError, SectorDomainError
from lmglab import classical, dynamics, spectral
from lmglab.classical import PhasePoint
from lmglab.spin_core import (
    CouplingParams,
    SpinSpace,
    build_dense_hamiltonian,
    coherent_amplitudes,
)


# --- exact quantum evolution -------------------------------------------------

def test_survival_probability_free_spin_closed_form():
    """For H = Jz an equatorial coherent state rotates rigidly:
    SP(t) = cos(t/2)^(4J)."""
    j = 30
    space = SpinSpace(j)
    data = spectral.full_spectrum(space, CouplingParams(0.0, 0.0))
    st = coherent_amplitudes(space, theta=np.pi / 2, phi=0.3)
    times = np.linspace(0.0, 2.0, 41)
    sp, jz, _ = dynamics.evolve_quantum(st, data, times)
    want = np.cos(times / 2.0) ** (4 * j)
    np.testing.assert_allclose(sp, want, atol=1e-10)
    # Jz is conserved by the free Hamiltonian
    np.testing.assert_allclose(jz, jz[0], atol=1e-12)


def test_quench_initial_values(space100, coup_deep, spectra_deep):
    pt = PhasePoint(q=1.2, p=-0.5)
    st = coherent_amplitudes(space100, theta=pt.theta, phi=pt.phi)
    times = np.linspace(0.0, 1.0, 11)
    sp, jz, evo = dynamics.evolve_quantum(st, spectra_deep, times)
    assert sp[0] == 1.0  # bitwise
    assert jz[0] == pytest.approx(pt.z, abs=1e-10)
    assert np.all(sp <= 1.0 + 1e-12) and np.all(sp >= 0.0)
    # evolved vectors stay normalized (unitarity)
    vecs = evo.vectors(times)
    norms = np.linalg.norm(vecs, axis=1)
    np.testing.assert_allclose(norms, 1.0, atol=1e-12)


def test_two_dominant_components_beat(space100, coup_ac, spectra_ac):
    """A state supported on a near-degenerate pair beats as
    (1 + cos(dE t))/2 and vanishes at t = pi/dE."""
    sec = spectra_ac.plus
    k = 63  # tight avoided pair (63, 64)
    de = sec.energies[k + 1] - sec.energies[k]
    psi = (spectra_ac.full_vector(+1, k) + spectra_ac.full_vector(+1, k + 1)) / np.sqrt(2)
    # overlap of the evolved state with itself via the eigenphase formula
    times = np.array([0.0, 0.25 * np.pi / de, np.pi / de])
    weights = np.array([0.5, 0.5])
    energies = np.array([sec.energies[k], sec.energies[k + 1]])
    amp = np.exp(-1j * np.outer(times, energies)) @ weights
    sp = np.abs(amp) ** 2
    want = (1.0 + np.cos(de * times)) / 2.0
    np.testing.assert_allclose(sp, want, atol=1e-12)
    assert sp[-1] == pytest.approx(0.0, abs=1e-12)
    assert np.linalg.norm(psi) == pytest.approx(1.0, abs=1e-12)


def test_sector_recombination_matches_dense_propagator():
    """Evolving per parity sector and recombining equals dense expm."""
    space = SpinSpace(8)
    coup = CouplingParams(gamma_x=-3.0, gamma_y=-7.0)
    data = spectral.full_spectrum(space, coup)
    st = coherent_amplitudes(space, theta=1.0, phi=0.4)
    times = np.array([0.0, 0.7, 2.3])
    _, _, evo = dynamics.evolve_quantum(st, data, times)
    vecs = evo.vectors(times)
    h = build_dense_hamiltonian(space, coup)
    for i, t in enumerate(times):
        u = scipy.linalg.expm(-1j * t * h)
        want = u @ st.amplitudes
        phase = np.vdot(want, vecs[i])
        assert abs(abs(phase) - 1.0) < 1e-10
        np.testing.assert_allclose(vecs[i], want, atol=1e-10)


def test_ehrenfest_short_time_slope(space100, coup_deep, spectra_deep):
    theta0, phi0 = 1.1, 0.7
    st = coherent_amplitudes(space100, theta=theta0, phi=phi0)
    delta = 1e-4
    times = np.array([0.0, delta, 2 * delta])
    _, jz, _ = dynamics.evolve_quantum(st, spectra_deep, times)
    slope_q = (jz[2] - jz[0]) / (2 * delta)
    pt = PhasePoint.from_angles(theta0, phi0)
    x, y, _ = pt.bloch_vector()
    slope_cl = (coup_deep.gamma_x - coup_deep.gamma_y) * x * y
    assert slope_q == pytest.approx(slope_cl, rel=0.01)


def test_time_grid_validation(space100, spectra_deep):
    st = coherent_amplitudes(space100, theta=1.0, phi=0.0)
    with pytest.raises(ConfigError):
        dynamics.evolve_quantum(st, spectra_deep, np.array([1.0, 2.0]))
    with pytest.raises(ConfigError):
        dynamics.evolve_quantum(st, spectra_deep, np.array([0.0, 2.0, 1.0]))


# --- Wigner sampling ---------------------------------------------------------

def test_wigner_sample_moments(space100):
    j = 100
    pt = PhasePoint(q=1.2, p=-0.4)
    cfg = dynamics.TWAConfig(m_samples=20000, seed=11)
    sample = dynamics.sample_wigner(pt, j, cfg)
    n0 = pt.bloch_vector()
    cosang = np.zeros(len(sample.points))
    zvals = np.zeros(len(sample.points))
    for i, (q, p) in enumerate(sample.points):
        n = PhasePoint(q=q, p=p).bloch_vector()
        cosang[i] = np.dot(n, n0)
        zvals[i] = 0.5 * (q * q + p * p) - 1.0
    theta2 = np.arccos(np.clip(cosang, -1, 1)) ** 2
    m = len(sample.points)
    # total geodesic variance 2 * 1/(2J) = 1/J
    assert np.mean(theta2) == pytest.approx(1.0 / j, abs=5.0 / (np.sqrt(m) * j))
    # sample mean of z: center value shrunk by the curvature factor E[cos d]
    shrink = 1.0 - 0.5 / j
    se = np.std(zvals) / np.sqrt(m)
    assert np.mean(zvals) == pytest.approx(pt.z * shrink, abs=3 * se)


def test_wigner_self_overlap_normalization(space100):
    pt = PhasePoint(q=0.9, p=0.7)
    cfg = dynamics.TWAConfig(m_samples=20000, seed=13)
    sample = dynamics.sample_wigner(pt, 100, cfg)
    w = dynamics.wigner_density(100, pt, sample.points[:, 0], sample.points[:, 1])
    est = (2 * np.pi / 100) * np.mean(w)
    se = (2 * np.pi / 100) * np.std(w) / np.sqrt(len(w))
    assert est == pytest.approx(1.0, abs=3 * se)


def test_wigner_sampling_requires_large_j():
    with pytest.raises(ConfigError):
        dynamics.sample_wigner(PhasePoint(0.0, 0.0), 5, dynamics.TWAConfig(seed=1))


def test_wigner_sampling_near_rim_stays_on_disc():
    # a center hugging the chart rim still maps every sample into the disc;
    # the clip counter reports any numerically grazing points
    pt = PhasePoint.from_z_phi(0.9999, 0.0)
    cfg = dynamics.TWAConfig(m_samples=2000, seed=3)
    sample = dynamics.sample_wigner(pt, 100, cfg)
    assert sample.clipped >= 0
    assert np.all(sample.points[:, 0] ** 2 + sample.points[:, 1] ** 2 <= 4.0 + 1e-9)
    assert np.all(np.isfinite(sample.points))


def test_twa_config_validation():
    with pytest.raises(ConfigError):
        dynamics.TWAConfig(m_samples=10)


# --- TWA observables ---------------------------------------------------------

def test_twa_initial_values(space100, coup_deep):
    pt = PhasePoint(q=1.0, p=0.6)
    cfg = dynamics.TWAConfig(m_samples=4000, seed=5)
    sample = dynamics.sample_wigner(pt, 100, cfg)
    times = np.linspace(0.0, 1.0, 5)
    series = dynamics.twa_observables(sample, coup_deep, times, cfg)
    assert series.sp[0] == pytest.approx(1.0, abs=3 * series.sp_err[0])
    shrink_bias = abs(pt.z) * 0.5 / 100
    assert series.jz[0] == pytest.approx(pt.z, abs=3 * series.jz_err[0] + shrink_bias)
    assert series.max_energy_drift < 1e-6


def test_twa_matches_quantum_beat_frequency(space100, coup_deep, spectra_deep):
    """Near an elliptic minimum both jz series oscillate at the classical
    orbital frequency for t below the Ehrenfest time."""
    fps = [f for f in classical.find_fixed_points(coup_deep) if f.kind == "minimum"]
    fp = fps[0]
    # small displacement off the minimum
    pt = PhasePoint(q=fp.point.q + 0.12, p=fp.point.p + 0.1)
    st = coherent_amplitudes(space100, theta=pt.theta, phi=pt.phi)
    times = np.linspace(0.0, 20.0, 801)
    _, jz_q, _ = dynamics.evolve_quantum(st, spectra_deep, times)
    cfg = dynamics.TWAConfig(m_samples=1500, seed=8)
    sample = dynamics.sample_wigner(pt, 100, cfg)
    series = dynamics.twa_observables(sample, coup_deep, times, cfg)

    def peak_frequency(y):
        y = y - np.mean(y)
        spec = np.abs(np.fft.rfft(y))
        freqs = np.fft.rfftfreq(len(times), d=times[1] - times[0])
        return freqs[1 + int(np.argmax(spec[1:]))] * 2 * np.pi

    w_q = peak_frequency(jz_q)
    w_c = peak_frequency(series.jz)
    df = 2 * np.pi / times[-1]
    assert abs(w_q - w_c) <= df + 1e-12
    # harmonic frequency from the Hessian: omega = sqrt(det)
    from lmglab.classical import _energy_hessian_qp

    hq = _energy_hessian_qp(fp.point.q, fp.point.p,
                            coup_deep.gamma_x, coup_deep.gamma_y)
    omega = np.sqrt(np.linalg.det(hq))
    assert w_q == pytest.approx(omega, rel=0.08)


# --- rolling averages --------------------------------------------------------

def test_rolling_average_constant_identity():
    t = np.linspace(0, 50, 501)
    y = np.full_like(t, 3.7)
    np.testing.assert_allclose(dynamics.rolling_average(t, y, 10.0), y, atol=1e-14)


def test_rolling_average_suppresses_fast_oscillation():
    t = np.linspace(0, 50, 1001)
    y = np.cos(2 * np.pi * t)
    avg = dynamics.rolling_average(t, y, 10.0)
    inner = (t > 5) & (t < 45)
    assert np.abs(avg[inner]).max() < 0.1


def test_rolling_average_tiny_window_is_identity():
    t = np.linspace(0, 50, 1001)
    y = np.cos(2 * np.pi * t)
    np.testing.assert_allclose(dynamics.rolling_average(t, y, 1e-4), y, atol=0)


# --- scenarios ---------------------------------------------------------------

def test_scenario_reference_placements():
    a = dynamics.scenario_builder("a", j=100, ratio=3.0)
    assert a.couplings.gamma_x == pytest.approx(-4.10331, abs=5e-6)
    assert a.epsilon == pytest.approx(-2.17351 + 0.05, abs=5e-5)
    assert a.orbit.branch == "outer" and a.partner.branch == "inner"
    assert a.alpha0.p == pytest.approx(0.0, abs=1e-14)
    assert classical.classical_energy(a.alpha0, a.couplings) == pytest.approx(
        a.epsilon, abs=1e-9
    )
    c = dynamics.scenario_builder("c", j=100, ratio=3.0)
    assert c.couplings.gamma_x == pytest.approx(-4.25529, abs=5e-6)
    e = dynamics.scenario_builder("e", j=100, ratio=3.0)
    assert e.orbit.branch == "single" and e.t_max == 200.0
    assert abs(e.alpha0.q) < 1e-12  # well orbit never crosses P = 0
    h = dynamics.scenario_builder("h", j=100, ratio=3.0)
    assert h.partner is None and h.epsilon > -1.0
    f = dynamics.scenario_builder("f", j=100, ratio=3.0)
    assert f.orbit.branch == "inner" and f.partner.branch == "outer"
    with pytest.raises(ConfigError):
        dynamics.scenario_builder("z")


def test_scenario_energy_feasibility_error():
    # at weak coupling the separatrix sits above -1.3, so the inner orbit
    # requested by scenario g does not exist there
    with pytest.raises(SectorDomainError):
        dynamics.scenario_builder("g", j=10, ratio=3.0, crossing_index=14)


def test_run_scenario_smoke_small_j():
    scen = dynamics.scenario_builder("b", j=40, ratio=3.0)
    cfg = dynamics.TWAConfig(m_samples=1000, seed=4)
    times = np.linspace(0.0, 5.0, 101)
    res, evo, sample = dynamics.run_scenario(scen, cfg, times=times)
    assert res.sp_quantum[0] == 1.0
    assert res.sp_classical[0] == pytest.approx(1.0, abs=3 * res.sp_classical_err[0])
    avg = res.rolling("jz_quantum")
    assert avg.shape == times.shape
