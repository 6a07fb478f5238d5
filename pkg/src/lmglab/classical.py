"""Classical limit of the model on the Bloch sphere.

The coherent-state energy surface per excitation,

    h(z, phi) = z + (1 - z^2)/2 * (gamma_x cos^2 phi + gamma_y sin^2 phi),

with z = -cos(theta), lives on the sphere; the chart

    Q = sqrt(2(1+z)) cos(phi),   P = -sqrt(2(1+z)) sin(phi)

maps it to a disc of radius 2 with dQ dP equal to the solid-angle
element, so (Q, P) is a canonical pair and h is a polynomial

    h(Q, P) = u/2 - 1 + (4-u)(gamma_x Q^2 + gamma_y P^2)/8,   u = Q^2+P^2.

This module provides the energy surface and its flow, level-set
("trajectory") extraction from the quadratic-in-z structure, fixed
points and sector classification, the semiclassical density of states

    rho_sc(E) = (1/2pi) int dphi n_roots(phi, eps) / sqrt(D(phi, eps)),
    D = 1 - A(phi)(2 eps - A(phi)),   A = gamma_x cos^2 + gamma_y sin^2,

and EBK actions of closed level-set branches.  Everything operates on
immutable inputs and is safe to evaluate in parallel.

Sign convention of the flow: the quantum Heisenberg equation for <Jz>
on coherent states gives dz/dt = -dh/dphi, dphi/dt = +dh/dz (t in units
of 1/eps0), equivalent to dQ/dt = dh/dP, dP/dt = -dh/dQ in the disc
chart.  This is validated against the quantum Ehrenfest slope in the
test suite.
"""

import functools
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import quad, solve_ivp

from .errors import ConfigError, DegenerateSectorError, NumericalFailureError

__all__ = [
    "PhasePoint",
    "SectorLabel",
    "CriticalEnergy",
    "ClassicalTrajectory",
    "FixedPoint",
    "classical_energy",
    "energy_qp",
    "energy_grad_qp",
    "classify_sector",
    "find_fixed_points",
    "trajectory_branches",
    "level_set_roots",
    "semiclassical_dos",
    "semiclassical_count",
    "ebk_action",
    "ebk_level_sum",
    "flow",
    "flow_batch",
    "hamiltonian_rhs",
]

_DISC_TOL = 1e-9


@dataclass(frozen=True)
class PhasePoint:
    """A point on the radius-2 disc chart of the Bloch sphere."""

    q: float
    p: float

    def __post_init__(self):
        if self.q**2 + self.p**2 > 4.0 + _DISC_TOL:
            raise ConfigError(f"point ({self.q}, {self.p}) lies outside the disc Q^2+P^2 <= 4")

    @property
    def z(self):
        return 0.5 * (self.q**2 + self.p**2) - 1.0

    @property
    def phi(self):
        return np.arctan2(-self.p, self.q)

    @property
    def theta(self):
        return np.arccos(-np.clip(self.z, -1.0, 1.0))

    @property
    def radius(self):
        return np.hypot(self.q, self.p)

    @classmethod
    def from_z_phi(cls, z, phi):
        r = np.sqrt(max(2.0 * (1.0 + z), 0.0))
        return cls(q=r * np.cos(phi), p=-r * np.sin(phi))

    @classmethod
    def from_angles(cls, theta, phi):
        return cls.from_z_phi(-np.cos(theta), phi)

    def bloch_vector(self):
        """Unit vector (x, y, z) with x = sin(theta)cos(phi), etc."""
        z = np.clip(self.z, -1.0, 1.0)
        s = np.sqrt(max(1.0 - z * z, 0.0))
        return np.array([s * np.cos(self.phi), s * np.sin(self.phi), z])


# --- energy surface -------------------------------------------------------

def energy_qp(q, p, gamma_x, gamma_y):
    """h(Q, P); broadcasts over array input."""
    q = np.asarray(q, dtype=float)
    p = np.asarray(p, dtype=float)
    u = q * q + p * p
    v = gamma_x * q * q + gamma_y * p * p
    return 0.5 * u - 1.0 + 0.125 * (4.0 - u) * v


def energy_grad_qp(q, p, gamma_x, gamma_y):
    """(dh/dQ, dh/dP)."""
    u = q * q + p * p
    v = gamma_x * q * q + gamma_y * p * p
    hq = q * (1.0 - 0.25 * v + 0.25 * (4.0 - u) * gamma_x)
    hp = p * (1.0 - 0.25 * v + 0.25 * (4.0 - u) * gamma_y)
    return hq, hp


def _energy_hessian_qp(q, p, gamma_x, gamma_y):
    u = q * q + p * p
    v = gamma_x * q * q + gamma_y * p * p
    c = 1.0 - 0.25 * v
    hqq = c + 0.25 * (4.0 - u) * gamma_x - gamma_x * q * q
    hpp = c + 0.25 * (4.0 - u) * gamma_y - gamma_y * p * p
    hqp = -0.5 * q * p * (gamma_x + gamma_y)
    return np.array([[hqq, hqp], [hqp, hpp]])


def classical_energy(point, couplings):
    """Energy per excitation eps = h(Q, P) of a phase-space point."""
    return float(energy_qp(point.q, point.p, couplings.gamma_x, couplings.gamma_y))


def angular_coupling(phi, gamma_x, gamma_y):
    """A(phi) = gamma_x cos^2 phi + gamma_y sin^2 phi."""
    s = np.sin(phi) ** 2
    return gamma_x + (gamma_y - gamma_x) * s


def level_set_roots(phi, epsilon, gamma_x, gamma_y, tol=1e-12):
    """Admissible roots z of h(z, phi) = epsilon, ascending.

    The quadratic A z^2 - 2 z + (2 eps - A) = 0 is solved in the
    cancellation-free form: the large root (1 + sqrt(D))/A and the small
    root (2 eps - A)/(1 + sqrt(D)), the latter reducing smoothly to the
    linear-limit solution z = eps as A -> 0.  Roots with |z| <= 1 are
    kept (ties at |z| = 1 included).
    """
    a = float(angular_coupling(phi, gamma_x, gamma_y))
    disc = 1.0 - a * (2.0 * epsilon - a)
    if disc < 0.0:
        return []
    sq = np.sqrt(disc)
    roots = [(2.0 * epsilon - a) / (1.0 + sq)]
    if a != 0.0:
        roots.append((1.0 + sq) / a)
    out = sorted(z for z in roots if abs(z) <= 1.0 + tol)
    return [min(max(z, -1.0), 1.0) for z in out]


# --- fixed points and sector classification -------------------------------

@dataclass(frozen=True)
class FixedPoint:
    point: PhasePoint
    epsilon: float
    kind: str  # "minimum" | "maximum" | "saddle"
    is_pole: bool = False


def _newton_refine(q, p, gamma_x, gamma_y, steps=60, tol=1e-13):
    for _ in range(steps):
        g = np.array(energy_grad_qp(q, p, gamma_x, gamma_y))
        if np.linalg.norm(g) < tol:
            return q, p
        hess = _energy_hessian_qp(q, p, gamma_x, gamma_y)
        try:
            dq, dp = np.linalg.solve(hess, -g)
        except np.linalg.LinAlgError:
            return None
        q, p = q + dq, p + dp
        if q * q + p * p > 4.0:
            return None
    g = np.array(energy_grad_qp(q, p, gamma_x, gamma_y))
    return (q, p) if np.linalg.norm(g) < 1e-10 else None


def find_fixed_points(couplings):
    """All critical points of h: disc interior plus the two poles.

    Interior stationary points lie on the symmetry axes at z = 1/gamma;
    seeds there plus the origin are polished by Newton iteration
    (non-converging seeds are skipped).  The north pole (the disc rim)
    is classified from the sign of A(phi) - 1: a saddle when A - 1
    changes sign, otherwise an extremum at eps = +1.
    """
    gx, gy = couplings.gamma_x, couplings.gamma_y
    seeds = [(0.0, 0.0)]
    if abs(gx) >= 1.0:
        r = np.sqrt(2.0 * (1.0 + 1.0 / gx))
        seeds += [(r, 0.0), (-r, 0.0)]
    if abs(gy) >= 1.0:
        r = np.sqrt(2.0 * (1.0 + 1.0 / gy))
        seeds += [(0.0, r), (0.0, -r)]
    found = []
    for q0, p0 in seeds:
        res = _newton_refine(q0, p0, gx, gy)
        if res is None:
            continue
        q, p = res
        if any(np.hypot(q - f[0], p - f[1]) < 1e-8 for f in found):
            continue
        found.append((q, p))
    points = []
    for q, p in found:
        hess = _energy_hessian_qp(q, p, gx, gy)
        eigs = np.linalg.eigvalsh(hess)
        if eigs[0] > 0:
            kind = "minimum"
        elif eigs[1] < 0:
            kind = "maximum"
        else:
            kind = "saddle"
        points.append(
            FixedPoint(
                point=PhasePoint(q=q, p=p),
                epsilon=float(energy_qp(q, p, gx, gy)),
                kind=kind,
            )
        )
    # north pole: h -> 1 with h - 1 ~ u*(A(phi) - 1) just inside the rim
    lo, hi = min(gx, gy), max(gx, gy)
    if lo > 1.0:
        kind = "minimum"
    elif hi < 1.0:
        kind = "maximum"
    else:
        kind = "saddle"
    points.append(
        FixedPoint(point=PhasePoint(q=2.0, p=0.0), epsilon=1.0, kind=kind, is_pole=True)
    )
    return points


@dataclass(frozen=True)
class CriticalEnergy:
    kind: str  # "ground" | "esqpt-log-divergence" | "edos-discontinuity"
    epsilon: float


@dataclass(frozen=True)
class SectorLabel:
    sector: str  # "I" | "II" | "III" | "IV"
    critical_energies: tuple
    gamma_m: float
    gamma_M: float | None  # set in sector III only


def classify_sector(couplings, boundary_tol=1e-12):
    """Sector of the coupling plane plus its critical energies.

    Critical energies come from the numerically located fixed points:
    the global minimum is the ground energy, every saddle marks a
    logarithmic divergence of the density of states, and interior
    extrema strictly between the global extremes mark a discontinuity.
    """
    gx, gy = couplings.gamma_x, couplings.gamma_y
    ax, ay = abs(gx), abs(gy)
    if abs(ax - 1.0) < boundary_tol or abs(ay - 1.0) < boundary_tol:
        raise DegenerateSectorError(
            f"couplings ({gx}, {gy}) sit on a sector boundary |gamma| = 1"
        )
    if ax < 1.0 and ay < 1.0:
        sector = "I"
    elif ax > 1.0 and ay > 1.0:
        sector = "III" if np.sign(gx) == np.sign(gy) else "IV"
    else:
        sector = "II"
    fps = find_fixed_points(couplings)
    eps_all = [fp.epsilon for fp in fps]
    ground, top = min(eps_all), max(eps_all)
    crits = [CriticalEnergy(kind="ground", epsilon=ground)]
    for fp in fps:
        if fp.kind == "saddle":
            crits.append(CriticalEnergy(kind="esqpt-log-divergence", epsilon=fp.epsilon))
        elif ground + 1e-9 < fp.epsilon < top - 1e-9:
            crits.append(CriticalEnergy(kind="edos-discontinuity", epsilon=fp.epsilon))
    # merge duplicates (symmetric partners share an energy)
    unique = []
    for ce in sorted(crits, key=lambda c: (c.epsilon, c.kind)):
        if not any(abs(ce.epsilon - u.epsilon) < 1e-9 and ce.kind == u.kind for u in unique):
            unique.append(ce)
    gamma_big_m = float(np.sign(gx) * min(ax, ay)) if sector == "III" else None
    return SectorLabel(
        sector=sector,
        critical_energies=tuple(unique),
        gamma_m=float(min(gx, gy)),
        gamma_M=gamma_big_m,
    )


@functools.lru_cache(maxsize=128)
def _saddle_energies(gamma_x, gamma_y):
    from .spin_core import CouplingParams

    fps = find_fixed_points(CouplingParams(gamma_x=gamma_x, gamma_y=gamma_y))
    return tuple(fp.epsilon for fp in fps if fp.kind == "saddle")


# --- level-set branches ----------------------------------------------------

@dataclass(frozen=True)
class ClassicalTrajectory:
    """One connected component of the level set h = epsilon.

    ``qp`` holds ordered samples along the closed curve (not repeated at
    the seam); ``branch`` is "inner"/"outer" for the degenerate pair of
    the strongly coupled sector and "single" otherwise; ``phi_domain``
    lists the admissible phi arcs.
    """

    epsilon: float
    branch: str
    qp: np.ndarray = field(repr=False)
    phi_domain: tuple = ()

    @property
    def samples(self):
        return [PhasePoint(q=float(q), p=float(p)) for q, p in self.qp]

    def arclength(self):
        d = np.diff(np.vstack([self.qp, self.qp[:1]]), axis=0)
        return float(np.hypot(d[:, 0], d[:, 1]).sum())


def _turning_phis_quarter(epsilon, gx, gy, scale=1.0):
    """phi in (0, pi/2) where the discriminant of the z-quadratic vanishes.

    ``scale`` rescales the angular coupling (used for the EBK variant
    A -> 2J/(2J-1) A).
    """
    if epsilon**2 < 1.0:
        return []
    s = np.sqrt(epsilon**2 - 1.0)
    out = []
    sgx, sgy = scale * gx, scale * gy
    if sgx == sgy:
        return []
    for a_crit in (epsilon - s, epsilon + s):
        t = (a_crit - sgx) / (sgy - sgx)
        if 1e-14 < t < 1.0 - 1e-14:
            out.append(float(np.arcsin(np.sqrt(t))))
    return sorted(out)


def _qp_from_z_phi(z, phi):
    r = np.sqrt(np.clip(2.0 * (1.0 + np.asarray(z)), 0.0, None))
    return np.column_stack([r * np.cos(phi), -r * np.sin(phi)])


def _roots_grid(phis, epsilon, gx, gy):
    """(z_low, z_high, count) arrays over a phi grid; NaN where absent."""
    a = angular_coupling(phis, gx, gy)
    disc = 1.0 - a * (2.0 * epsilon - a)
    ok = disc >= 0.0
    sq = np.sqrt(np.where(ok, disc, 0.0))
    small = (2.0 * epsilon - a) / (1.0 + sq)
    with np.errstate(divide="ignore", invalid="ignore"):
        big = np.where(a != 0.0, (1.0 + sq) / np.where(a != 0.0, a, 1.0), np.inf)
    zs = np.stack([small, big])
    zs = np.where(np.abs(zs) <= 1.0 + 1e-12, zs, np.nan)
    zs = np.where(ok[None, :], zs, np.nan)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", category=RuntimeWarning)
        z_low = np.nanmin(zs, axis=0)
        z_high = np.nanmax(zs, axis=0)
    count = np.sum(~np.isnan(zs), axis=0)
    return z_low, z_high, count


def trajectory_branches(epsilon, couplings, n_samples=720):
    """Connected closed branches of the level set h(Q, P) = epsilon.

    Returns an empty list when epsilon lies outside the classical range.
    Full-circle root pairs yield an inner and an outer closed curve;
    root pairs confined to phi arcs (turning points where the
    discriminant vanishes) close onto themselves around one arc.
    """
    gx, gy = couplings.gamma_x, couplings.gamma_y
    quarter = _turning_phis_quarter(epsilon, gx, gy)
    # unfold quarter turning points to the full circle
    turns = sorted(
        {t for q in quarter for t in (q, -q, np.pi - q, -np.pi + q)}
    )
    branches = []
    if not turns:
        phis = np.linspace(-np.pi, np.pi, n_samples, endpoint=False)
        z_low, z_high, count = _roots_grid(phis, epsilon, gx, gy)
        if count.min() != count.max():
            # should not happen away from eps = +-1; fall back to arcs
            turns = list(np.linspace(-np.pi, np.pi, 9)[:-1])
        else:
            n = count[0]
            full = ((-np.pi, np.pi),)
            if n == 0:
                return []
            if n == 2 and np.nanmin(z_high - z_low) > 1e-13:
                branches.append(
                    ClassicalTrajectory(
                        epsilon=epsilon, branch="inner",
                        qp=_qp_from_z_phi(z_low, phis), phi_domain=full,
                    )
                )
                branches.append(
                    ClassicalTrajectory(
                        epsilon=epsilon, branch="outer",
                        qp=_qp_from_z_phi(z_high, phis), phi_domain=full,
                    )
                )
            else:
                z = z_high if n == 2 else np.where(np.isnan(z_low), z_high, z_low)
                branches.append(
                    ClassicalTrajectory(
                        epsilon=epsilon, branch="single",
                        qp=_qp_from_z_phi(z, phis), phi_domain=full,
                    )
                )
            return branches
    # arc case: merge admissible intervals between turning points (cyclic)
    bounds = turns + [turns[0] + 2.0 * np.pi]
    admissible = []
    for lo, hi in zip(bounds[:-1], bounds[1:]):
        mid = 0.5 * (lo + hi)
        if len(level_set_roots(mid, epsilon, gx, gy)) > 0:
            admissible.append([lo, hi])
    if not admissible:
        return []
    merged = [admissible[0]]
    for lo, hi in admissible[1:]:
        if abs(lo - merged[-1][1]) < 1e-12:
            merged[-1][1] = hi
        else:
            merged.append([lo, hi])
    if len(merged) > 1 and abs((merged[0][0] + 2 * np.pi) - merged[-1][1]) < 1e-12:
        merged[0][0] = merged[-1][0] - 2.0 * np.pi
        merged.pop()
    half = max(n_samples // 2, 16)
    for lo, hi in merged:
        # cluster samples toward the turning points, where dz/dphi blows up
        t = np.linspace(0.0, np.pi, half)
        phis = 0.5 * (lo + hi) + 0.5 * (hi - lo) * np.cos(t[::-1])
        z_low, z_high, count = _roots_grid(phis, epsilon, gx, gy)
        # turning points carry the double root z = 1/A exactly
        for end in (0, -1):
            a_end = angular_coupling(phis[end], gx, gy)
            if a_end != 0.0:
                z_end = min(max(1.0 / a_end, -1.0), 1.0)
                z_low[end] = z_high[end] = z_end
        interior_nan = np.isnan(z_low) | np.isnan(z_high)
        if np.any(interior_nan):
            # roundoff at near-turning samples: fall back to the partner root
            z_low = np.where(np.isnan(z_low), z_high, z_low)
            z_high = np.where(np.isnan(z_high), z_low, z_high)
        keep = ~(np.isnan(z_low) | np.isnan(z_high))
        phis, z_low, z_high = phis[keep], z_low[keep], z_high[keep]
        fwd = _qp_from_z_phi(z_high, phis)
        bwd = _qp_from_z_phi(z_low[::-1][1:-1], phis[::-1][1:-1])
        qp = np.vstack([fwd, bwd])
        branches.append(
            ClassicalTrajectory(
                epsilon=epsilon, branch="single", qp=qp,
                phi_domain=((float(lo), float(hi)),),
            )
        )
    return branches


# --- semiclassical density of states --------------------------------------

def _dos_integral(epsilon, gx, gy):
    """int over [0, pi/2] of n_roots/sqrt(D), split at turning points."""
    breaks = [0.0] + _turning_phis_quarter(epsilon, gx, gy) + [0.5 * np.pi]

    def integrand(phi):
        a = angular_coupling(phi, gx, gy)
        disc = 1.0 - a * (2.0 * epsilon - a)
        if disc <= 0.0:
            return 0.0
        n = len(level_set_roots(phi, epsilon, gx, gy))
        return n / np.sqrt(disc)

    total = 0.0
    for lo, hi in zip(breaks[:-1], breaks[1:]):
        if hi - lo < 1e-13:
            continue
        if len(level_set_roots(0.5 * (lo + hi), epsilon, gx, gy)) == 0:
            continue
        with warnings.catch_warnings():
            # endpoint 1/sqrt singularities trip the roundoff detector while
            # the extrapolated value is already converged
            warnings.simplefilter("ignore")
            val, _ = quad(integrand, lo, hi, limit=200, epsabs=1e-11, epsrel=1e-10)
        total += val
    return total


def semiclassical_dos(energy, space, couplings, cap=1e6):
    """Semiclassical density of states at total energy E.

    Returns ``(rho, divergent)``; evaluation at a saddle energy (a
    logarithmic divergence) reports the cap value with the flag set.
    """
    j = space.j
    eps = energy / (j * couplings.epsilon0)
    for es in _saddle_energies(couplings.gamma_x, couplings.gamma_y):
        if abs(eps - es) < 1e-9:
            return cap, True
    val = (2.0 / np.pi) * _dos_integral(eps, couplings.gamma_x, couplings.gamma_y)
    val /= couplings.epsilon0
    if not np.isfinite(val) or val > cap:
        return cap, True
    return float(val), False


def _sublevel_measure(phi, epsilon, gx, gy):
    """Length of {z in [-1,1] : h(z, phi) <= epsilon} at fixed phi."""
    a = angular_coupling(phi, gx, gy)
    disc = 1.0 - a * (2.0 * epsilon - a)
    if a == 0.0:
        return np.clip(epsilon, -1.0, 1.0) + 1.0
    if disc < 0.0:
        # parabola never meets eps: fully below iff concave (a > 0)
        return 2.0 if a > 0.0 else 0.0
    sq = np.sqrt(disc)
    z1 = (2.0 * epsilon - a) / (1.0 + sq)
    z2 = (1.0 + sq) / a
    zlo, zhi = min(z1, z2), max(z1, z2)
    if a < 0.0:
        # convex in z: h <= eps between the roots
        return max(min(zhi, 1.0) - max(zlo, -1.0), 0.0)
    # concave: h <= eps outside the roots
    left = max(min(zlo, 1.0) - (-1.0), 0.0)
    right = max(1.0 - max(zhi, -1.0), 0.0)
    return left + right


def semiclassical_count(energy, space, couplings):
    """Cumulative semiclassical level count up to total energy E.

    Evaluated as the phase-space area (J/2pi) * area{h <= eps}, which
    equals the integral of the density of states without touching its
    singularities.
    """
    j = space.j
    eps = energy / (j * couplings.epsilon0)
    gx, gy = couplings.gamma_x, couplings.gamma_y
    breaks = [0.0] + _turning_phis_quarter(eps, gx, gy) + [0.5 * np.pi]
    total = 0.0
    for lo, hi in zip(breaks[:-1], breaks[1:]):
        if hi - lo < 1e-13:
            continue
        val, _ = quad(
            lambda f: _sublevel_measure(f, eps, gx, gy), lo, hi,
            limit=200, epsabs=1e-11, epsrel=1e-10,
        )
        total += val
    return (j / (2.0 * np.pi)) * 4.0 * total


# --- EBK actions -----------------------------------------------------------

def _ebk_scale(j):
    return 2.0 * j / (2.0 * j - 1.0)


def ebk_level_sum(space, couplings, n=4096):
    """(J/pi) * int_(-pi)^(pi) dphi / A_tilde, the energy-independent sum
    of the inner and outer branch actions in the degenerate regime.

    Equals -(2J-1)/sqrt(gamma_x gamma_y) for same-sign negative
    couplings; at a predicted crossing its magnitude is the integer
    2J - N.
    """
    j = space.j
    scale = _ebk_scale(j)
    phis = np.linspace(-np.pi, np.pi, n, endpoint=False)
    a = scale * angular_coupling(phis, couplings.gamma_x, couplings.gamma_y)
    if np.any(a == 0.0):
        raise SectorDomainError("angular coupling vanishes; level sum undefined")
    return (j / np.pi) * np.mean(1.0 / a) * 2.0 * np.pi


def ebk_action(branch, space, couplings, n=4096, refine_tol=1e-9):
    """Action (J/2pi) * closed integral of z~(phi) dphi along one branch.

    z~ solves the level-set equation with the EBK-rescaled coupling
    A~ = 2J/(2J-1) A.  Full-circle branches integrate the selected root
    with the (spectrally convergent) periodic trapezoid rule; arc
    branches integrate the enclosed z~ span with turning-point
    clustering.  The value is signed by the z~ values themselves.
    """
    if len(branch.qp) < 8 or branch.arclength() < 1e-9:
        raise ConfigError("degenerate branch: not a closed trajectory")
    j = space.j
    scale = _ebk_scale(j)
    gx, gy = scale * couplings.gamma_x, scale * couplings.gamma_y
    eps = branch.epsilon
    full_circle = len(branch.phi_domain) == 1 and (
        branch.phi_domain[0][1] - branch.phi_domain[0][0] >= 2.0 * np.pi - 1e-9
    )
    if full_circle:
        prev = None
        m = n // 4
        while True:
            phis = np.linspace(-np.pi, np.pi, m, endpoint=False)
            z_low, z_high, count = _roots_grid(phis, eps, gx, gy)
            if np.any(count == 0):
                raise NumericalFailureError(
                    "branch lost under the EBK coupling rescale", stage="ebk_action"
                )
            if branch.branch == "inner":
                z = z_low
            elif branch.branch == "outer":
                z = z_high
            else:
                z = np.where(np.isnan(z_low), z_high, z_low)
            val = (j / (2.0 * np.pi)) * np.mean(z) * 2.0 * np.pi
            if prev is not None and abs(val - prev) < refine_tol * max(1.0, abs(val)):
                return float(val)
            if m >= (1 << 20):
                return float(val)
            prev, m = val, 2 * m
    # arc branch: area between the two root sheets over the rescaled arcs
    turns = _turning_phis_quarter(eps, couplings.gamma_x, couplings.gamma_y, scale=scale)
    arcs = _admissible_arcs(eps, gx, gy, turns)
    total = 0.0
    for lo, hi in arcs:
        t = np.linspace(0.0, np.pi, n // 2)
        phis = 0.5 * (lo + hi) + 0.5 * (hi - lo) * np.cos(t[::-1])
        z_low, z_high, _ = _roots_grid(phis, eps, gx, gy)
        span = np.where(np.isnan(z_high - z_low), 0.0, z_high - z_low)
        total += np.trapezoid(span, phis)
    return float((j / (2.0 * np.pi)) * total)


def _admissible_arcs(epsilon, gx, gy, quarter_turns):
    turns = sorted({t for q in quarter_turns for t in (q, -q, np.pi - q, -np.pi + q)})
    if not turns:
        return [(-np.pi, np.pi)]
    bounds = turns + [turns[0] + 2.0 * np.pi]
    arcs = []
    for lo, hi in zip(bounds[:-1], bounds[1:]):
        mid = 0.5 * (lo + hi)
        if len(level_set_roots(mid, epsilon, gx, gy)) > 0:
            arcs.append((lo, hi))
    return arcs


# --- Hamiltonian flow ------------------------------------------------------

def hamiltonian_rhs(t, y, gamma_x, gamma_y):
    """dQ/dt = dh/dP, dP/dt = -dh/dQ for y = [Q..., P...] (flattened)."""
    n = y.size // 2
    q, p = y[:n], y[n:]
    u = q * q + p * p
    v = gamma_x * q * q + gamma_y * p * p
    c = 1.0 - 0.25 * v
    dq = p * (c + 0.25 * (4.0 - u) * gamma_y)
    dp = -q * (c + 0.25 * (4.0 - u) * gamma_x)
    return np.concatenate([dq, dp])


def flow(start, t_grid, couplings, rtol=3e-12, atol=1e-14):
    """Integrate one trajectory; returns array (len(t_grid), 2).

    Energy is conserved to well below 1e-8 over t ~ 200 at the default
    tolerances (adaptive 8th-order Runge-Kutta; the Hamiltonian is not
    separable, which rules out simple splitting schemes).
    """
    if start.q**2 + start.p**2 >= 4.0:
        raise ConfigError("flow start must lie strictly inside the disc")
    out = flow_batch(np.array([[start.q, start.p]]), t_grid, couplings, rtol, atol)
    return out[0]


def flow_batch(starts, t_grid, couplings, rtol=1e-10, atol=1e-12):
    """Integrate many trajectories at once; returns (n, len(t_grid), 2).

    All samples share the adaptive step (the error norm spans the whole
    batch), which is fine for ensembles; use ``flow`` when a single
    trajectory must satisfy a strict drift bound on its own.
    """
    starts = np.asarray(starts, dtype=float)
    t_grid = np.asarray(t_grid, dtype=float)
    n = len(starts)
    y0 = np.concatenate([starts[:, 0], starts[:, 1]])
    sol = solve_ivp(
        hamiltonian_rhs,
        (t_grid[0], t_grid[-1]),
        y0,
        method="DOP853",
        t_eval=t_grid,
        rtol=rtol,
        atol=atol,
        args=(couplings.gamma_x, couplings.gamma_y),
    )
    if not sol.success:
        raise NumericalFailureError(
            f"trajectory integration failed: {sol.message}", stage="flow"
        )
    qs = sol.y[:n, :].T  # (nt, n)
    ps = sol.y[n:, :].T
    return np.stack([qs, ps], axis=-1).transpose(1, 0, 2)
