"""Husimi fields, Wehrl entropies, and orbit line integrals."""

import numpy as np
import pytest

from lmglab.errors import ConfigError
from lmglab import classical, phase_space, spectral
from lmglab.spin_core import CouplingParams, SpinSpace, coherent_amplitudes

LIEB = lambda j: 2 * j / (2 * j + 1.0)


def test_husimi_lowest_weight_state(space100):
    psi = np.zeros(space100.dim)
    psi[0] = 1.0
    f = phase_space.husimi_state(space100, psi)
    assert f.normalized_integral() == pytest.approx(1.0, abs=5e-3)
    assert f.values.max() == pytest.approx(1.0, abs=1e-12)
    qq, pp = np.meshgrid(f.q_axis, f.p_axis)
    imax = np.argmax(f.values)
    assert abs(qq.ravel()[imax]) < 1e-12 and abs(pp.ravel()[imax]) < 1e-12
    assert np.all(f.values >= 0.0) and np.all(f.values <= 1.0 + 1e-12)


def test_husimi_eigenstate_normalization_and_parity(spectra_deep):
    for parity, k in ((+1, 30), (+1, 64), (-1, 40)):
        f = phase_space.husimi_eigenstate(spectra_deep, parity, k)
        assert f.normalized_integral() == pytest.approx(1.0, abs=5e-3)
        # parity eigenstates have inversion-symmetric fields
        assert np.abs(f.values - f.values[::-1, ::-1]).max() < 1e-12


def test_husimi_brightest_near_saddles(space100, coup_deep, spectra_deep):
    """The eigenstate at the separatrix energy concentrates at the
    hyperbolic points (+-sqrt(1.5), 0), where the classical motion is
    slowest."""
    shift = coup_deep.zero_point_shift(space100.j)
    target = -2.125 * space100.j + shift
    k = int(np.argmin(np.abs(spectra_deep.plus.energies - target)))
    f = phase_space.husimi_eigenstate(spectra_deep, +1, k)
    qq, pp = np.meshgrid(f.q_axis, f.p_axis)
    imax = np.argmax(f.values)
    qb, pb = qq.ravel()[imax], pp.ravel()[imax]
    saddle_dist = min(np.hypot(qb - np.sqrt(1.5), pb), np.hypot(qb + np.sqrt(1.5), pb))
    assert saddle_dist < 0.25


def test_husimi_mass_concentrates_on_level_set(space100, coup_deep, spectra_deep):
    """Mid-spectrum eigenstates put >= 80% of Husimi mass within a tube of
    radius 3/sqrt(2J) around the classical level set of their energy."""
    from scipy.spatial import cKDTree

    shift = coup_deep.zero_point_shift(space100.j)
    for k in (30, 64, 90):
        e = spectra_deep.plus.energies[k]
        eps_cl = (e - shift) / space100.j
        pts = np.vstack([
            b.qp for b in classical.trajectory_branches(eps_cl, coup_deep,
                                                        n_samples=2048)
        ])
        tree = cKDTree(pts)
        f = phase_space.husimi_eigenstate(spectra_deep, +1, k)
        qq, pp = np.meshgrid(f.q_axis, f.p_axis)
        d, _ = tree.query(np.column_stack([qq[f.mask], pp[f.mask]]))
        vals = f.values[f.mask]
        frac = vals[d < 3.0 / np.sqrt(2 * space100.j)].sum() / vals.sum()
        assert frac >= 0.8


def test_wehrl_requires_enough_samples(space100):
    psi = np.zeros(space100.dim)
    psi[0] = 1.0
    with pytest.raises(ConfigError):
        phase_space.wehrl_entropy(space100, psi, n_samples=100)


def test_wehrl_coherent_closed_form(space100):
    st = coherent_amplitudes(space100, theta=0.8, phi=1.1)
    res = phase_space.wehrl_entropy(space100, st.amplitudes, n_samples=200000, seed=3)
    assert abs(res.value - LIEB(100)) < 3 * res.stderr
    assert res.stderr < 0.05


def test_wehrl_stderr_scaling(space100):
    st = coherent_amplitudes(space100, theta=0.8, phi=1.1)
    r1 = phase_space.wehrl_entropy(space100, st.amplitudes, n_samples=100000, seed=3)
    r2 = phase_space.wehrl_entropy(space100, st.amplitudes, n_samples=400000, seed=4)
    assert r1.stderr / r2.stderr == pytest.approx(2.0, rel=0.2)


def test_wehrl_grid_estimator_cross_checks_monte_carlo(space100):
    # independent quadrature route reproduces the coherent closed form and
    # agrees with sampling on an eigenstate
    st = coherent_amplitudes(space100, theta=2.1, phi=-0.4)
    grid_val = phase_space.wehrl_entropy_grid(space100, st.amplitudes, n_points=401)
    assert grid_val == pytest.approx(LIEB(100), abs=1e-6)


def test_wehrl_grid_vs_mc_eigenstate(space100, spectra_deep):
    psi = spectra_deep.full_vector(+1, 64)
    mc = phase_space.wehrl_entropy(space100, psi, n_samples=200000, seed=9)
    grid_val = phase_space.wehrl_entropy_grid(space100, psi, n_points=401)
    assert abs(mc.value - grid_val) < 3 * mc.stderr


def test_wehrl_bounds_hold(space100, spectra_deep):
    states = np.column_stack([spectra_deep.full_vector(+1, k) for k in (0, 30, 64)])
    vals, errs = phase_space.wehrl_entropy_many(space100, states, n_samples=50000, seed=12)
    for v, s in zip(vals, errs):
        assert v - 3 * s >= LIEB(100) - 1e-9
        assert v + 3 * s <= np.log(201.0) + 1e-9


def test_wehrl_uniform_density_upper_bound(space100):
    """A synthetic maximally spread state pushes W toward ln(2J+1)."""
    # uniform Husimi is attained only by the maximally mixed state, which is
    # not a vector; check the bound instead via the analytic value of a
    # uniform density plugged into the estimator identity
    j = space100.j
    q = 1.0 / (2 * j + 1.0)
    w_uniform = -(2 * j + 1.0) * (q * np.log(q))
    assert w_uniform == pytest.approx(np.log(2 * j + 1.0), abs=1e-12)


def test_wehrl_raw_convention_is_proportional(space100, spectra_deep):
    psi = spectra_deep.full_vector(+1, 50)
    a = phase_space.wehrl_entropy(space100, psi, n_samples=20000, seed=5)
    b = phase_space.wehrl_entropy(space100, psi, n_samples=20000, seed=5,
                                  convention="raw")
    factor = 4 * np.pi / (2 * space100.j + 1.0)
    assert b.value == pytest.approx(factor * a.value, rel=1e-12)
    assert b.stderr == pytest.approx(factor * a.stderr, rel=1e-12)


def test_wehrl_sweep_rows_deterministic(space100):
    coup = CouplingParams(gamma_x=-4.0, gamma_y=-12.0)
    rows1 = phase_space.wehrl_vs_energy(space100, coup, +1, n_samples=20000,
                                        seed=21, k_values=[10, 11])
    rows2 = phase_space.wehrl_vs_energy(space100, coup, +1, n_samples=20000,
                                        seed=21, k_values=[10, 11])
    assert rows1 == rows2
    assert {r["k"] for r in rows1} == {10, 11}


def test_line_integral_partner_orbit_tiny_for_localized_state(space100, coup_ac):
    """A coherent state on the outer orbit at eps=-1.3 has exponentially
    small Husimi weight along the well separated inner partner."""
    roots = classical.level_set_roots(0.0, -1.3, coup_ac.gamma_x, coup_ac.gamma_y)
    outer_pt = classical.PhasePoint.from_z_phi(roots[-1], 0.0)
    st = coherent_amplitudes(space100, theta=outer_pt.theta, phi=outer_pt.phi)
    branches = {b.branch: b for b in classical.trajectory_branches(-1.3, coup_ac)}
    l_inner = phase_space.line_integral(space100, st.amplitudes, branches["inner"])
    l_outer = phase_space.line_integral(space100, st.amplitudes, branches["outer"])
    assert l_inner < 1e-6
    assert l_outer > 0.1


def test_line_integral_direction_reversal(space100, coup_ac):
    import dataclasses

    branches = {b.branch: b for b in classical.trajectory_branches(-1.3, coup_ac)}
    orbit = branches["outer"]
    st = coherent_amplitudes(space100, theta=1.2, phi=0.5)
    reversed_orbit = dataclasses.replace(orbit, qp=orbit.qp[::-1].copy())
    a = phase_space.line_integral(space100, st.amplitudes, orbit)
    b = phase_space.line_integral(space100, st.amplitudes, reversed_orbit)
    assert a == pytest.approx(b, rel=0.01)


def test_line_integral_rejects_degenerate_orbit(space100, coup_ac):
    import dataclasses

    orbit = classical.trajectory_branches(-1.3, coup_ac)[0]
    zero_len = dataclasses.replace(orbit, qp=np.zeros((5, 2)))
    st = coherent_amplitudes(space100, theta=1.2, phi=0.5)
    with pytest.raises(ConfigError):
        phase_space.line_integral(space100, st.amplitudes, zero_len)
    with pytest.raises(ConfigError):
        phase_space.line_integral(
            space100, st.amplitudes, dataclasses.replace(orbit, qp=orbit.qp[:2])
        )
