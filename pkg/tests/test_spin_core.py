"""Parity blocks, coherent states, and the dense ladder-operator oracle."""

import numpy as np
import pytest

from lmglab.errors import ConfigError
from lmglab.spin_core import (
    CouplingParams,
    SpinSpace,
    build_dense_hamiltonian,
    build_parity_blocks,
    coherent_amplitudes,
    coherent_overlap,
    parity_of_basis_state,
)


def test_coupling_parametrization_roundtrip():
    rng = np.random.default_rng(5)
    for _ in range(25):
        gx, gy = rng.uniform(-15, 15, 2)
        eps0 = rng.uniform(0.2, 3.0)
        j = rng.integers(2, 300) / 2.0
        c = CouplingParams(gamma_x=gx, gamma_y=gy, epsilon0=eps0)
        back = CouplingParams.from_interactions(
            c.pair_interaction(j), c.exchange_interaction(j), j, epsilon0=eps0
        )
        assert back.gamma_x == pytest.approx(gx, abs=1e-12)
        assert back.gamma_y == pytest.approx(gy, abs=1e-12)


def test_coupling_reference_values():
    c = CouplingParams(gamma_x=-4.0, gamma_y=-12.0)
    assert c.pair_interaction(100) == pytest.approx(8.0 / 398.0, abs=1e-15)
    assert c.exchange_interaction(100) == pytest.approx(-16.0 / 398.0, abs=1e-15)


def test_epsilon0_must_be_positive():
    with pytest.raises(ConfigError):
        CouplingParams(gamma_x=0.0, gamma_y=0.0, epsilon0=-1.0)


def test_spin_space_basics():
    s = SpinSpace(1.5)
    assert s.dim == 4
    assert np.all(np.diff(s.m_values) == 1.0)
    assert s.m_values[0] == -1.5
    with pytest.raises(ConfigError):
        SpinSpace(1.2)
    with pytest.raises(ConfigError):
        SpinSpace(-1.0)


def test_parity_of_basis_state():
    assert parity_of_basis_state(100, -100) == +1
    assert parity_of_basis_state(100, -99) == -1
    assert parity_of_basis_state(1, 0) == -1
    with pytest.raises(ConfigError):
        parity_of_basis_state(1, 2)
    with pytest.raises(ConfigError):
        parity_of_basis_state(1, 0.5)


def test_free_spin_blocks():
    bp, bm = build_parity_blocks(SpinSpace(1), CouplingParams(0.0, 0.0))
    np.testing.assert_allclose(bp.diag, [-1.0, 1.0])
    np.testing.assert_allclose(bp.offdiag, [0.0])
    np.testing.assert_allclose(bm.diag, [0.0])


def test_j1_closed_form_eigenvalues():
    c = CouplingParams(gamma_x=0.9, gamma_y=-0.4)
    v, w = c.pair_interaction(1), c.exchange_interaction(1)
    bp, bm = build_parity_blocks(SpinSpace(1), c)
    got = np.linalg.eigvalsh(bp.to_dense())
    want = np.sort([w - np.sqrt(1 + v**2), w + np.sqrt(1 + v**2)])
    np.testing.assert_allclose(got, want, atol=1e-14)
    np.testing.assert_allclose(bm.diag, [2 * w], atol=1e-15)


def test_block_sizes_integer_j():
    for j in (1, 4, 7):
        bp, bm = build_parity_blocks(SpinSpace(j), CouplingParams(-2.0, 0.5))
        assert bp.size == j + 1
        assert bm.size == j
        assert len(bp.offdiag) == bp.size - 1


def test_blocks_match_dense_oracle_entrywise():
    """Reassembling the blocks reproduces the ladder-operator matrix and
    cross-parity elements vanish identically."""
    rng = np.random.default_rng(11)
    for _ in range(6):
        j = rng.integers(2, 21) / 2.0
        c = CouplingParams(gamma_x=rng.uniform(-14, 14), gamma_y=rng.uniform(-14, 14))
        space = SpinSpace(j)
        dense = build_dense_hamiltonian(space, c)
        scale = np.abs(dense).max()
        rebuilt = np.zeros_like(dense)
        for block in build_parity_blocks(space, c):
            idx = np.round(block.m_list + j).astype(int)
            rebuilt[np.ix_(idx, idx)] = block.to_dense()
        np.testing.assert_allclose(rebuilt, dense, atol=1e-13 * max(scale, 1.0))
        # parity mixing: entries between sectors are exactly zero
        par = np.array([parity_of_basis_state(j, m) for m in space.m_values])
        mix = dense[np.not_equal.outer(par, par)]
        assert np.all(mix == 0.0)


def test_half_spin_parametrization_rejected():
    with pytest.raises(ConfigError):
        build_parity_blocks(SpinSpace(0.5), CouplingParams(1.0, 1.0))


def test_coherent_south_pole_is_lowest_weight():
    st = coherent_amplitudes(SpinSpace(100), alpha=0)
    assert abs(st.amplitudes[0]) == pytest.approx(1.0, abs=1e-15)
    assert np.sum(np.abs(st.amplitudes[1:])) == 0.0


def test_coherent_equator_j1():
    st = coherent_amplitudes(SpinSpace(1), theta=np.pi / 2, phi=0.0)
    np.testing.assert_allclose(
        np.abs(st.amplitudes), [0.5, 1 / np.sqrt(2), 0.5], atol=1e-14
    )


def test_coherent_normalization_and_jz():
    rng = np.random.default_rng(3)
    space = SpinSpace(100)
    for _ in range(10):
        theta = rng.uniform(0, np.pi)
        phi = rng.uniform(-np.pi, np.pi)
        st = coherent_amplitudes(space, theta=theta, phi=phi)
        assert np.sum(np.abs(st.amplitudes) ** 2) == pytest.approx(1.0, abs=1e-12)
        assert st.jz_expectation() / 100 == pytest.approx(-np.cos(theta), abs=1e-10)


def test_coherent_north_pole_via_angles():
    st = coherent_amplitudes(SpinSpace(50), theta=np.pi, phi=0.7)
    assert abs(st.amplitudes[-1]) == pytest.approx(1.0, abs=1e-15)
    with pytest.raises(ConfigError):
        coherent_amplitudes(SpinSpace(50), alpha=complex(np.inf, 0.0))


def test_coherent_overlap_kernel():
    """|<a|b>|^2 = cos(Theta/2)^(4J) with Theta the sphere angle."""
    rng = np.random.default_rng(17)
    for j in (2, 9.5, 20):
        space = SpinSpace(j)
        for _ in range(8):
            t1, t2 = rng.uniform(0, np.pi, 2)
            p1, p2 = rng.uniform(-np.pi, np.pi, 2)
            s1 = coherent_amplitudes(space, theta=t1, phi=p1)
            s2 = coherent_amplitudes(space, theta=t2, phi=p2)
            n1 = np.array([np.sin(t1) * np.cos(p1), np.sin(t1) * np.sin(p1), np.cos(t1)])
            n2 = np.array([np.sin(t2) * np.cos(p2), np.sin(t2) * np.sin(p2), np.cos(t2)])
            ang = np.arccos(np.clip(n1 @ n2, -1, 1))
            want = np.cos(ang / 2.0) ** (4 * j)
            got = abs(coherent_overlap(s1, s2)) ** 2
            assert got == pytest.approx(want, abs=1e-10)
