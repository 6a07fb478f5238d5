"""Finite-J pseudo-spin representation of the anisotropic LMG Hamiltonian.

The Hamiltonian acts on a single (2J+1)-dimensional angular-momentum
multiplet,

    H = eps0*Jz + (V/2)(J+^2 + J-^2) + (W/2)(J+J- + J-J+),

or equivalently, with gamma_x = (2J-1)(W+V)/eps0 and
gamma_y = (2J-1)(W-V)/eps0,

    H = eps0*[Jz + gamma_x/(2J-1)*Jx^2 + gamma_y/(2J-1)*Jy^2].

Because H couples m only to m and m+-2, it block-diagonalizes into the
two eigenspaces of the parity operator exp(-i*pi*(Jz+J)); each block is
real symmetric tridiagonal in the |J m> basis restricted to fixed
(-1)^(J+m).  This module builds those blocks analytically (O(J) storage),
provides a dense ladder-operator construction as an independent oracle
for small J, and evaluates Bloch coherent states in an
overflow-safe log-binomial form.

All containers are frozen dataclasses; nothing mutates after
construction, so values can be shared freely between threads/processes.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy.special import gammaln

from .errors import ConfigError

__all__ = [
    "CouplingParams",
    "SpinSpace",
    "ParityBlock",
    "CoherentState",
    "build_parity_blocks",
    "build_dense_hamiltonian",
    "parity_of_basis_state",
    "coherent_amplitudes",
    "coherent_amplitude_matrix",
    "coherent_overlap",
]


@dataclass(frozen=True)
class CouplingParams:
    """Couplings (gamma_x, gamma_y) in units of eps0, with eps0 > 0."""

    gamma_x: float
    gamma_y: float
    epsilon0: float = 1.0

    def __post_init__(self):
        if not self.epsilon0 > 0:
            raise ConfigError(f"epsilon0 must be positive, got {self.epsilon0}")

    def pair_interaction(self, j):
        """V = eps0*(gamma_x - gamma_y) / (2*(2J-1)), the J+^2+J-^2 strength."""
        if 2.0 * j - 1.0 <= 0:
            raise ConfigError("the (gamma_x, gamma_y) parametrization is singular at J = 1/2")
        return self.epsilon0 * (self.gamma_x - self.gamma_y) / (2.0 * (2.0 * j - 1.0))

    def exchange_interaction(self, j):
        """W = eps0*(gamma_x + gamma_y) / (2*(2J-1)), the {J+,J-} strength."""
        if 2.0 * j - 1.0 <= 0:
            raise ConfigError("the (gamma_x, gamma_y) parametrization is singular at J = 1/2")
        return self.epsilon0 * (self.gamma_x + self.gamma_y) / (2.0 * (2.0 * j - 1.0))

    @classmethod
    def from_interactions(cls, v, w, j, epsilon0=1.0):
        """Invert the parametrization: gamma_x,y = (2J-1)(W +- V)/eps0."""
        f = (2.0 * j - 1.0) / epsilon0
        return cls(gamma_x=f * (w + v), gamma_y=f * (w - v), epsilon0=epsilon0)

    def zero_point_shift(self, j):
        """Constant J*W by which the exact coherent-state energy exceeds
        the classical surface J*[z + (gamma_x*x^2 + gamma_y*y^2)/2].

        Follows from <Jx^2> = J(2J-1)x^2/2 + J/2 on coherent states: the
        J/2 pieces of Jx^2 and Jy^2 add up to the x,y-independent constant
        J*W.  Subleading in J but relevant when aligning quantum spectra
        with semiclassical densities at moderate J.
        """
        return j * self.exchange_interaction(j)


def _check_half_integer(j):
    if j < 0.5 or abs(2.0 * j - round(2.0 * j)) > 1e-12:
        raise ConfigError(f"spin length must be a half-integer >= 1/2, got {j}")
    return round(2.0 * j) / 2.0


@dataclass(frozen=True)
class SpinSpace:
    """A single spin-J multiplet: dimension 2J+1, m = -J ... J."""

    j: float

    def __post_init__(self):
        object.__setattr__(self, "j", _check_half_integer(self.j))

    @property
    def dim(self):
        return int(round(2 * self.j)) + 1

    @property
    def m_values(self):
        return -self.j + np.arange(self.dim)


@dataclass(frozen=True)
class ParityBlock:
    """One parity sector of H as a real symmetric tridiagonal matrix.

    ``diag[i] = eps0*m_i + W*(J(J+1) - m_i^2)`` and
    ``offdiag[i] = (V/2)*c(m_i)*c(m_i+1)`` with
    ``c(m) = sqrt(J(J+1) - m(m+1))``, coupling m_i to m_i+2.
    """

    j: float
    parity: int
    m_list: np.ndarray = field(repr=False)
    diag: np.ndarray = field(repr=False)
    offdiag: np.ndarray = field(repr=False)

    @property
    def size(self):
        return len(self.diag)

    def matvec(self, vec):
        """Apply the tridiagonal block to a vector (or column-stack)."""
        if vec.ndim == 1:
            out = self.diag * vec
            if self.size > 1:
                out[:-1] += self.offdiag * vec[1:]
                out[1:] += self.offdiag * vec[:-1]
        else:
            out = self.diag[:, None] * vec
            if self.size > 1:
                out[:-1] += self.offdiag[:, None] * vec[1:]
                out[1:] += self.offdiag[:, None] * vec[:-1]
        return out

    def to_dense(self):
        mat = np.diag(self.diag)
        if self.size > 1:
            mat += np.diag(self.offdiag, 1) + np.diag(self.offdiag, -1)
        return mat


def parity_of_basis_state(j, m):
    """Parity eigenvalue exp(-i*pi*(m+J)) = (-1)^(J+m) of |J m>."""
    _check_half_integer(j)
    k = j + m
    if abs(k - round(k)) > 1e-9 or abs(m) > j + 1e-9:
        raise ConfigError(f"m={m} is not a valid projection for J={j}")
    return 1 if round(k) % 2 == 0 else -1


def _ladder_coeff(j, m):
    # c(m) = sqrt(J(J+1) - m(m+1)); coefficient of J+ on |J m>
    return np.sqrt(j * (j + 1.0) - m * (m + 1.0))


def build_parity_blocks(space, couplings):
    """Split H into its two parity blocks.

    Returns ``(block_plus, block_minus)``.  The direct sum of the blocks
    is unitarily equivalent (by a basis permutation) to the full
    Hamiltonian; membership of |J m> is decided by (-1)^(J+m).
    """
    j = space.j
    eps0 = couplings.epsilon0
    v = couplings.pair_interaction(j)
    w = couplings.exchange_interaction(j)
    m_all = space.m_values
    blocks = []
    for parity in (+1, -1):
        mask = np.array([parity_of_basis_state(j, m) == parity for m in m_all])
        m_list = m_all[mask]
        diag = eps0 * m_list + w * (j * (j + 1.0) - m_list**2)
        lower = m_list[:-1]
        offdiag = 0.5 * v * _ladder_coeff(j, lower) * _ladder_coeff(j, lower + 1.0)
        blocks.append(
            ParityBlock(j=j, parity=parity, m_list=m_list, diag=diag, offdiag=offdiag)
        )
    return blocks[0], blocks[1]


def build_dense_hamiltonian(space, couplings):
    """Dense (2J+1) x (2J+1) Hamiltonian from ladder operators.

    Independent oracle for the analytic tridiagonal blocks; intended for
    J <= a few tens only.
    """
    j = space.j
    dim = space.dim
    m = space.m_values
    jp = np.zeros((dim, dim))
    for i in range(dim - 1):
        jp[i + 1, i] = _ladder_coeff(j, m[i])
    jm = jp.T
    jz = np.diag(m)
    v = couplings.pair_interaction(j)
    w = couplings.exchange_interaction(j)
    h = couplings.epsilon0 * jz
    h = h + 0.5 * v * (jp @ jp + jm @ jm)
    h = h + 0.5 * w * (jp @ jm + jm @ jp)
    return h


@dataclass(frozen=True)
class CoherentState:
    """Bloch coherent state |alpha>, alpha = tan(theta/2)*exp(-i*phi).

    ``amplitudes[i]`` is the component on |J m_i> with m ascending:

        binom(2J, J+m)^(1/2) sin^(J+m)(theta/2) cos^(J-m)(theta/2)
            * exp(-i(J+m)phi)

    evaluated through log-gamma so that J of a few hundred stays finite.
    """

    j: float
    theta: float
    phi: float
    amplitudes: np.ndarray = field(repr=False)

    @property
    def alpha(self):
        return np.tan(0.5 * self.theta) * np.exp(-1j * self.phi)

    def jz_expectation(self):
        """<Jz> = -J cos(theta) for a coherent state."""
        space_m = -self.j + np.arange(len(self.amplitudes))
        return float(np.sum(space_m * np.abs(self.amplitudes) ** 2))


def coherent_amplitude_matrix(j, theta, phi):
    """Amplitude rows for many (theta, phi) points at once.

    Returns complex array of shape (npoints, 2J+1); row i is the
    m-ascending amplitude vector of the coherent state at
    (theta[i], phi[i]).  Poles are handled exactly: theta=0 gives
    delta_(m,-J), theta=pi gives delta_(m,J).
    """
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    phi = np.atleast_1d(np.asarray(phi, dtype=float))
    dim = int(round(2 * j)) + 1
    jm = np.arange(dim)  # J + m = 0 .. 2J
    logbin = gammaln(2 * j + 1.0) - gammaln(jm + 1.0) - gammaln(2 * j - jm + 1.0)

    s = np.sin(0.5 * theta)
    c = np.cos(0.5 * theta)
    # log of s**jm and c**(2J-jm) with the 0**0 = 1 convention at the poles
    with np.errstate(divide="ignore", invalid="ignore"):
        ls = np.where(s > 0.0, np.log(np.where(s > 0.0, s, 1.0)), -np.inf)
        lc = np.where(c > 0.0, np.log(np.where(c > 0.0, c, 1.0)), -np.inf)
        logmag = (
            0.5 * logbin[None, :]
            + jm[None, :] * ls[:, None]
            + (2 * j - jm)[None, :] * lc[:, None]
        )
    # rows at a pole: only the jm=0 (or jm=2J) entry survives
    south = s == 0.0
    north = c == 0.0
    logmag[south] = -np.inf
    logmag[south, 0] = 0.0
    logmag[north] = -np.inf
    logmag[north, dim - 1] = 0.0
    mag = np.exp(logmag)
    phase = np.exp(-1j * np.outer(phi, jm))
    return mag * phase


def coherent_amplitudes(space, alpha=None, *, theta=None, phi=None):
    """Coherent state for a given alpha, or directly for angles.

    The angle form must be used to reach the north pole (theta = pi),
    where |alpha| diverges.
    """
    if alpha is not None:
        if theta is not None or phi is not None:
            raise ConfigError("pass either alpha or (theta, phi), not both")
        alpha = complex(alpha)
        if not np.isfinite(alpha.real) or not np.isfinite(alpha.imag):
            raise ConfigError("alpha must be finite; use theta=pi for the north pole")
        theta = 2.0 * np.arctan(abs(alpha))
        phi = -np.angle(alpha) if alpha != 0 else 0.0
    elif theta is None or phi is None:
        raise ConfigError("need alpha or both theta and phi")
    amps = coherent_amplitude_matrix(space.j, [theta], [phi])[0]
    return CoherentState(j=space.j, theta=float(theta), phi=float(phi), amplitudes=amps)


def coherent_overlap(state_a, state_b):
    """<a|b> for two coherent states of the same J."""
    if state_a.j != state_b.j:
        raise ConfigError("coherent states live in different spin spaces")
    return complex(np.vdot(state_a.amplitudes, state_b.amplitudes))
