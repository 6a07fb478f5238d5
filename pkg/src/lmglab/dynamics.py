"""Quench dynamics: exact quantum evolution versus the truncated Wigner
approximation for initial Bloch coherent states.

Quantum side: the state is expanded once in the parity-resolved
eigenbasis (components c_k) and evolved by phase rotation, which is
exact at any time.  The survival probability is

    SP(t) = |sum_k |c_k|^2 exp(-i E_k t)|^2

and j_z(t) = <Jz>(t)/J follows from eigenbasis matrix elements of Jz
(parity-diagonal, so the two sectors evolve independently).

Classical side: the initial Wigner distribution of a coherent state is
approximated by an isotropic Gaussian on the sphere,
w(u) = (J/pi) exp(-J Theta^2) with Theta the geodesic angle to the
center, sampled through the tangent-plane exponential map (variance
1/(2J) per direction).  Samples evolve under the Hamiltonian flow and

    SP_cl(t) = (2 pi / J) * mean_i w(u_i(t)),
    jz_cl(t) = mean_i z(u_i(t)).

The 2 pi/J prefactor makes SP_cl(0) = 1 up to Monte Carlo error (it is
fixed by the Gaussian self-overlap integral w^2 = J/2 pi).
"""

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .classical import (
    PhasePoint,
    classical_energy,
    find_fixed_points,
    flow_batch,
    level_set_roots,
    trajectory_branches,
)
from .errors import ConfigError, SectorDomainError
from .spectral import eigencomponents, full_spectrum, predict_crossing_coupling
from .spin_core import CouplingParams, SpinSpace, coherent_amplitudes

__all__ = [
    "TWAConfig",
    "WignerSample",
    "QuenchResult",
    "QuantumEvolution",
    "evolve_quantum",
    "sample_wigner",
    "wigner_density",
    "twa_observables",
    "twa_sp",
    "twa_jz",
    "rolling_average",
    "Scenario",
    "scenario_builder",
    "run_scenario",
    "SCENARIO_KINDS",
]


@dataclass(frozen=True)
class TWAConfig:
    """Monte Carlo and integrator settings for the classical ensemble."""

    m_samples: int = 5000
    seed: int = 2022
    rtol: float = 1e-10
    atol: float = 1e-12
    window: float = 10.0
    batch: int = 500

    def __post_init__(self):
        if self.m_samples < 10**3:
            raise ConfigError("TWA needs at least 1e3 samples")


@dataclass(frozen=True)
class WignerSample:
    """Phase-space sample of the Gaussian coherent-state Wigner density."""

    j: float
    center: PhasePoint
    points: np.ndarray = field(repr=False)  # (M, 2) disc coordinates
    clipped: int = 0  # samples whose sphere image grazed the chart rim


@dataclass(frozen=True)
class QuenchResult:
    times: np.ndarray = field(repr=False)
    sp_quantum: np.ndarray = field(repr=False)
    jz_quantum: np.ndarray = field(repr=False)
    sp_classical: np.ndarray = field(repr=False)
    sp_classical_err: np.ndarray = field(repr=False)
    jz_classical: np.ndarray = field(repr=False)
    jz_classical_err: np.ndarray = field(repr=False)
    window: float = 10.0

    def rolling(self, name):
        series = getattr(self, name)
        return rolling_average(self.times, series, self.window)


class QuantumEvolution:
    """Eigenbasis phase-rotation evolution of a coherent initial state."""

    def __init__(self, alpha0, spectra):
        self.spectra = spectra
        self.space = spectra.space
        comps = eigencomponents(alpha0, spectra)
        self._c = comps
        self._energies = {p: spectra.sector(p).energies for p in (+1, -1)}
        weights = np.concatenate([np.abs(comps[+1]) ** 2, np.abs(comps[-1]) ** 2])
        self._weights = weights
        self._weight_sum = weights.sum()
        self._all_e = np.concatenate([self._energies[+1], self._energies[-1]])
        # Jz in the eigenbasis, blockwise (Jz preserves parity)
        self._jz_eig = {}
        for p in (+1, -1):
            sec = spectra.sector(p)
            self._jz_eig[p] = (sec.vectors * sec.m_list[:, None]).T @ sec.vectors

    def survival_probability(self, times):
        """SP(t), exactly 1 at t = 0.

        The t = 0 norm is computed through the same contraction as the
        running amplitude so the ratio is bitwise 1 there.
        """
        times = np.asarray(times, dtype=float)
        phases = np.exp(-1j * np.outer(times, self._all_e))
        amp = phases @ self._weights
        amp0 = np.exp(-1j * np.outer(np.zeros(1), self._all_e)) @ self._weights
        return np.abs(amp) ** 2 / np.abs(amp0[0]) ** 2

    def jz(self, times):
        times = np.asarray(times, dtype=float)
        out = np.zeros(len(times))
        for p in (+1, -1):
            c = self._c[p]
            w = c[None, :] * np.exp(-1j * np.outer(times, self._energies[p]))
            out += np.einsum("ti,ij,tj->t", w.conj(), self._jz_eig[p], w).real
        return out / self.space.j

    def vectors(self, times):
        """Evolved state in the full m basis, one row per time."""
        times = np.asarray(times, dtype=float)
        out = np.zeros((len(times), self.space.dim), dtype=complex)
        for p in (+1, -1):
            sec = self.spectra.sector(p)
            w = self._c[p][None, :] * np.exp(-1j * np.outer(times, self._energies[p]))
            idx = np.round(sec.m_list + self.space.j).astype(int)
            out[:, idx] += w @ sec.vectors.T
        return out

    @property
    def components(self):
        return self._c


def evolve_quantum(alpha0, spectra, times):
    """SP(t), jz(t) and the evolution handle for a coherent initial state."""
    times = np.asarray(times, dtype=float)
    if len(times) and times[0] != 0.0:
        raise ConfigError("time grid must start at 0")
    if np.any(np.diff(times) <= 0):
        raise ConfigError("time grid must be strictly ascending")
    evo = QuantumEvolution(alpha0, spectra)
    return evo.survival_probability(times), evo.jz(times), evo


# --- Wigner sampling and TWA ------------------------------------------------

def _tangent_basis(theta, phi):
    """Orthonormal tangent frame of the Bloch vector (x, y, z)."""
    n0 = np.array([
        np.sin(theta) * np.cos(phi),
        np.sin(theta) * np.sin(phi),
        -np.cos(theta),
    ])
    if np.sin(theta) < 1e-12:
        e1 = np.array([1.0, 0.0, 0.0])
        e2 = np.array([0.0, 1.0, 0.0])
    else:
        e1 = np.array([
            np.cos(theta) * np.cos(phi),
            np.cos(theta) * np.sin(phi),
            np.sin(theta),
        ])
        e2 = np.array([-np.sin(phi), np.cos(phi), 0.0])
    return n0, e1, e2


def sample_wigner(center, j, config):
    """Draw phase-space points from the Gaussian Wigner density.

    Tangent-plane normal deviates with variance 1/(2J) per direction are
    pushed to the sphere along geodesics (so the geodesic angle to the
    center is exactly the sampled radius), then mapped to the disc
    chart.  Points landing numerically on the chart rim are clipped and
    counted.
    """
    if j < 10:
        raise ConfigError("Gaussian Wigner sampling assumes J >= 10")
    if isinstance(center, PhasePoint):
        theta0, phi0 = center.theta, center.phi
    else:
        theta0, phi0 = center.theta, center.phi  # CoherentState carries angles
        center = PhasePoint.from_angles(theta0, phi0)
    rng = np.random.default_rng(config.seed)
    ab = rng.normal(0.0, np.sqrt(0.5 / j), size=(config.m_samples, 2))
    d = np.hypot(ab[:, 0], ab[:, 1])
    beta = np.arctan2(ab[:, 1], ab[:, 0])
    n0, e1, e2 = _tangent_basis(theta0, phi0)
    direction = np.outer(np.cos(beta), e1) + np.outer(np.sin(beta), e2)
    n = np.cos(d)[:, None] * n0[None, :] + np.sin(d)[:, None] * direction
    z = n[:, 2]
    clipped = int(np.sum(z > 1.0 - 1e-12))
    z = np.clip(z, -1.0, 1.0 - 1e-15)
    scale = np.sqrt(2.0 / (1.0 - z))
    q = n[:, 0] * scale
    p = -n[:, 1] * scale
    return WignerSample(j=j, center=center, points=np.column_stack([q, p]), clipped=clipped)


def wigner_density(j, center, q, p):
    """Gaussian Wigner weight (J/pi) exp(-J Theta^2) at disc points."""
    q = np.asarray(q, dtype=float)
    p = np.asarray(p, dtype=float)
    u = q * q + p * p
    z = np.clip(0.5 * u - 1.0, -1.0, 1.0)
    s = np.sqrt(np.clip(1.0 - z * z, 0.0, None))
    r = np.where(np.sqrt(u) > 0.0, np.sqrt(u), 1.0)
    x = np.where(u > 0.0, s * q / r, 0.0)
    y = np.where(u > 0.0, -s * p / r, 0.0)
    n0 = center.bloch_vector()
    cosang = np.clip(x * n0[0] + y * n0[1] + z * n0[2], -1.0, 1.0)
    ang = np.arccos(cosang)
    return (j / np.pi) * np.exp(-j * ang * ang)


@dataclass(frozen=True)
class TwaSeries:
    times: np.ndarray = field(repr=False)
    sp: np.ndarray = field(repr=False)
    sp_err: np.ndarray = field(repr=False)
    jz: np.ndarray = field(repr=False)
    jz_err: np.ndarray = field(repr=False)
    max_energy_drift: float = 0.0


def twa_observables(sample, couplings, times, config):
    """Evolve a Wigner sample and accumulate SP_cl(t) and jz_cl(t).

    Batches are integrated independently (vectorized flow) and reduced
    in fixed order; the estimate is therefore reproducible bit for bit
    for a given sample.
    """
    times = np.asarray(times, dtype=float)
    j = sample.j
    m = len(sample.points)
    nt = len(times)
    sums = np.zeros((4, nt))  # w, w^2, z, z^2
    drift = 0.0
    for lo in range(0, m, config.batch):
        batch = sample.points[lo:lo + config.batch]
        traj = flow_batch(batch, times, couplings, rtol=config.rtol, atol=config.atol)
        qs, ps = traj[:, :, 0], traj[:, :, 1]
        h = np.asarray(
            0.5 * (qs**2 + ps**2) - 1.0
            + 0.125 * (4.0 - qs**2 - ps**2) * (couplings.gamma_x * qs**2 + couplings.gamma_y * ps**2)
        )
        drift = max(drift, float(np.abs(h - h[:, :1]).max()))
        w = wigner_density(j, sample.center, qs, ps)
        z = 0.5 * (qs**2 + ps**2) - 1.0
        sums[0] += w.sum(axis=0)
        sums[1] += (w * w).sum(axis=0)
        sums[2] += z.sum(axis=0)
        sums[3] += (z * z).sum(axis=0)
    pref = 2.0 * np.pi / j
    w_mean = sums[0] / m
    w_var = np.maximum(sums[1] / m - w_mean**2, 0.0)
    z_mean = sums[2] / m
    z_var = np.maximum(sums[3] / m - z_mean**2, 0.0)
    return TwaSeries(
        times=times,
        sp=pref * w_mean,
        sp_err=pref * np.sqrt(w_var / m),
        jz=z_mean,
        jz_err=np.sqrt(z_var / m),
        max_energy_drift=drift,
    )


def twa_sp(sample, couplings, times, config):
    series = twa_observables(sample, couplings, times, config)
    return series.sp, series.sp_err


def twa_jz(sample, couplings, times, config):
    series = twa_observables(sample, couplings, times, config)
    return series.jz, series.jz_err


def rolling_average(times, series, window):
    """Centered moving mean over [t - w/2, t + w/2], shrinking at the ends."""
    times = np.asarray(times, dtype=float)
    series = np.asarray(series, dtype=float)
    if len(times) > 1:
        step = np.min(np.diff(times))
        if window <= step:
            return series.copy()
    csum = np.concatenate([[0.0], np.cumsum(series)])
    lo = np.searchsorted(times, times - 0.5 * window, side="left")
    hi = np.searchsorted(times, times + 0.5 * window, side="right")
    return (csum[hi] - csum[lo]) / (hi - lo)


# --- the eight reference quench scenarios -----------------------------------

SCENARIO_KINDS = "abcdefgh"

_SCENARIO_TABLE = {
    # kind: (crossing index parity, orbit, energy rule)
    "a": ("even", "outer", "esqpt+0.05"),
    "b": ("even", "outer", "-1.3"),
    "c": ("odd", "outer", "esqpt+0.05"),
    "d": ("odd", "outer", "-1.3"),
    "e": ("even", "well", "esqpt-0.8"),
    "f": ("even", "inner", "esqpt+0.05"),
    "g": ("even", "inner", "-1.3"),
    "h": ("even", "high", "-0.3"),
}


@dataclass(frozen=True)
class Scenario:
    kind: str
    space: SpinSpace
    couplings: CouplingParams
    alpha0: PhasePoint
    epsilon: float
    orbit: object  # ClassicalTrajectory the state starts on
    partner: object  # partner ClassicalTrajectory or None
    t_max: float = 50.0
    dt: float = 0.05

    @property
    def times(self):
        n = int(round(self.t_max / self.dt))
        return np.linspace(0.0, self.t_max, n + 1)


def _esqpt_energy(couplings):
    saddles = [fp.epsilon for fp in find_fixed_points(couplings) if fp.kind == "saddle"]
    if not saddles:
        raise SectorDomainError("no saddle point: couplings outside the degenerate sector")
    return max(s for s in saddles if s < 1.0 - 1e-9)


def scenario_builder(kind, j=100, ratio=3.0, crossing_index=None):
    """Couplings and initial coherent-state placement of a named scenario.

    Cases a/b sit at the avoided-crossing coupling (outer orbit, energy
    just above the separatrix and deep in the degenerate window); c/d
    repeat them at the neighboring real-crossing coupling; e starts well
    below the separatrix on a parity-broken well orbit; f/g mirror a/b
    on the inner orbit; h starts on the single high-energy orbit.  All
    placements are at the P = 0 crossing of the designated orbit except
    the well orbit, which never crosses P = 0 and uses its outer Q = 0
    crossing instead.
    """
    if kind not in _SCENARIO_TABLE:
        raise ConfigError(f"unknown scenario {kind!r}; pick one of {SCENARIO_KINDS}")
    space = SpinSpace(j)
    two_j = round(2 * space.j)
    cross_parity, orbit_sel, energy_rule = _SCENARIO_TABLE[kind]
    if crossing_index is None:
        # the reference pair of neighboring conditions: N even then N odd
        n_even = int(round(0.86 * two_j))
        if n_even % 2:
            n_even += 1
        crossing_index = n_even if cross_parity == "even" else n_even + 1
    pred = predict_crossing_coupling(j, ratio, crossing_index, sign=-1)
    couplings = CouplingParams(gamma_x=pred.gamma_x, gamma_y=pred.gamma_y)
    esqpt = _esqpt_energy(couplings)
    if energy_rule.startswith("esqpt"):
        eps = esqpt + float(energy_rule[5:])
    else:
        eps = float(energy_rule)
    branches = trajectory_branches(eps, couplings)
    if not branches:
        raise SectorDomainError(f"no classical orbit at eps={eps}")
    by_kind = {b.branch: b for b in branches}
    if orbit_sel in ("outer", "inner"):
        if orbit_sel not in by_kind:
            raise SectorDomainError(
                f"scenario {kind!r} needs an {orbit_sel} orbit at eps={eps:.4f}"
            )
        orbit = by_kind[orbit_sel]
        partner = by_kind["inner" if orbit_sel == "outer" else "outer"]
        roots = level_set_roots(0.0, eps, couplings.gamma_x, couplings.gamma_y)
        z0 = roots[0] if orbit_sel == "inner" else roots[-1]
        alpha0 = PhasePoint.from_z_phi(z0, 0.0)
    elif orbit_sel == "high":
        orbit = by_kind.get("single") or branches[0]
        partner = None
        roots = level_set_roots(0.0, eps, couplings.gamma_x, couplings.gamma_y)
        alpha0 = PhasePoint.from_z_phi(roots[-1], 0.0)
    else:  # parity-broken well orbit: place at its outer Q = 0 crossing
        roots = level_set_roots(0.5 * np.pi, eps, couplings.gamma_x, couplings.gamma_y)
        z0 = roots[-1]
        alpha0 = PhasePoint.from_z_phi(z0, 0.5 * np.pi)
        dists = [np.hypot(b.qp[:, 0] - alpha0.q, b.qp[:, 1] - alpha0.p).min() for b in branches]
        home = int(np.argmin(dists))
        orbit = branches[home]
        partner = branches[1 - home] if len(branches) == 2 else None
    t_max = 200.0 if kind == "e" else 50.0
    return Scenario(
        kind=kind, space=space, couplings=couplings, alpha0=alpha0,
        epsilon=float(eps), orbit=orbit, partner=partner, t_max=t_max,
    )


def run_scenario(scenario, config=None, times=None):
    """Full quantum + TWA quench for one scenario; returns QuenchResult."""
    config = config or TWAConfig()
    times = scenario.times if times is None else np.asarray(times, dtype=float)
    spectra = full_spectrum(scenario.space, scenario.couplings)
    alpha0 = coherent_amplitudes(
        scenario.space, theta=scenario.alpha0.theta, phi=scenario.alpha0.phi
    )
    sp_q, jz_q, evo = evolve_quantum(alpha0, spectra, times)
    sample = sample_wigner(scenario.alpha0, scenario.space.j, config)
    series = twa_observables(sample, scenario.couplings, times, config)
    result = QuenchResult(
        times=times,
        sp_quantum=sp_q,
        jz_quantum=jz_q,
        sp_classical=series.sp,
        sp_classical_err=series.sp_err,
        jz_classical=series.jz,
        jz_classical_err=series.jz_err,
        window=config.window,
    )
    return result, evo, sample
