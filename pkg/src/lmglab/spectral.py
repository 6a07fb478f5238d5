"""Parity-resolved exact spectra, coupling sweeps, and level crossings.

Eigenproblems are solved per parity block with a LAPACK symmetric
tridiagonal solver (O(J^2) with eigenvectors instead of O(J^3) dense).
Within one sector the index k counts states from the sector ground
state, k = 0.

The semiclassical (EBK) condition for simultaneous degeneracies of the
two intermediate-energy trajectory families in the strongly coupled
same-sign sector is

    gamma_x * gamma_y = ((2J-1)/(2J-N))^2,   0 < N < 2J,

with N even producing avoided crossings between same-parity levels and
N odd producing real crossings between opposite-parity levels.  Avoided
crossings are located by golden-section minimization of the gap along a
fixed coupling ray; real crossings by root finding on the signed energy
difference (the gap at a true crossing sits far below any bracketing
tolerance, so minimization alone cannot resolve it).
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg
from scipy.optimize import brentq

from .errors import ConfigError, NumericalFailureError, SectorDomainError
from .spin_core import CouplingParams, SpinSpace, build_parity_blocks

__all__ = [
    "SectorSpectrum",
    "SpectralData",
    "CrossingPrediction",
    "GapRecord",
    "diagonalize",
    "full_spectrum",
    "predict_crossing_coupling",
    "locate_minimum_gap",
    "locate_parity_crossing",
    "eigencomponents",
    "order_parameter",
]


@dataclass(frozen=True)
class SectorSpectrum:
    """Eigenvalues (ascending) and eigenvectors of one parity block.

    ``vectors[:, k]`` is the k-th eigenvector over the block's m_list;
    ``vectors`` is None when only eigenvalues were requested.
    """

    parity: int
    m_list: np.ndarray = field(repr=False)
    energies: np.ndarray = field(repr=False)
    vectors: np.ndarray | None = field(repr=False, default=None)

    @property
    def size(self):
        return len(self.energies)


@dataclass(frozen=True)
class SpectralData:
    """Both parity sectors of one (J, couplings) Hamiltonian."""

    space: SpinSpace
    couplings: CouplingParams
    plus: SectorSpectrum
    minus: SectorSpectrum

    def sector(self, parity):
        return self.plus if parity == +1 else self.minus

    def full_vector(self, parity, k):
        """Eigenvector zero-padded to the full m = -J..J basis."""
        sec = self.sector(parity)
        if sec.vectors is None:
            raise ConfigError("spectrum was computed without eigenvectors")
        out = np.zeros(self.space.dim)
        idx = np.round(sec.m_list + self.space.j).astype(int)
        out[idx] = sec.vectors[:, k]
        return out

    def all_energies(self):
        """Sorted union of both sectors' eigenvalues."""
        return np.sort(np.concatenate([self.plus.energies, self.minus.energies]))


def diagonalize(block, want_vectors=True, check_residual=True):
    """Full spectrum of one parity block.

    Residuals ||H v - E v|| are verified against 1e-10 * ||H|| when
    eigenvectors are requested; a convergence failure raises
    NumericalFailureError carrying the block descriptor.
    """
    descriptor = f"parity {block.parity:+d} block, size {block.size}, J={block.j}"
    try:
        if block.size == 1:
            energies = block.diag.copy()
            vectors = np.ones((1, 1)) if want_vectors else None
        elif want_vectors:
            energies, vectors = scipy.linalg.eigh_tridiagonal(block.diag, block.offdiag)
        else:
            energies = scipy.linalg.eigvalsh_tridiagonal(block.diag, block.offdiag)
            vectors = None
    except (np.linalg.LinAlgError, scipy.linalg.LinAlgError) as exc:
        raise NumericalFailureError(
            f"tridiagonal eigensolver failed on {descriptor}: {exc}",
            stage="diagonalize",
            detail=descriptor,
        ) from exc
    if want_vectors and check_residual and block.size > 1:
        scale = np.abs(block.diag).max() + 2.0 * np.abs(block.offdiag).max()
        resid = block.matvec(vectors) - vectors * energies[None, :]
        worst = np.linalg.norm(resid, axis=0).max()
        if worst > 1e-10 * max(scale, 1.0):
            raise NumericalFailureError(
                f"eigenpair residual {worst:.3e} exceeds tolerance on {descriptor}",
                stage="diagonalize",
                detail=descriptor,
            )
    return SectorSpectrum(
        parity=block.parity, m_list=block.m_list, energies=energies, vectors=vectors
    )


def full_spectrum(space, couplings, want_vectors=True):
    plus, minus = build_parity_blocks(space, couplings)
    return SpectralData(
        space=space,
        couplings=couplings,
        plus=diagonalize(plus, want_vectors),
        minus=diagonalize(minus, want_vectors),
    )


@dataclass(frozen=True)
class CrossingPrediction:
    """EBK-predicted coupling for the N-th crossing along a fixed ray."""

    n: int
    kind: str  # "avoided-crossing" (N even) or "real-crossing" (N odd)
    product: float  # gamma_x * gamma_y
    gamma_x: float
    gamma_y: float


def predict_crossing_coupling(j, ratio, n, sign=-1):
    """Solve gamma_x*gamma_y = ((2J-1)/(2J-N))^2 on the ray gamma_y = ratio*gamma_x.

    ``sign`` picks the sign of gamma_x (the strongly coupled same-sign
    sector exists for either).  Couplings with |gamma_x| < 1 or
    |gamma_y| < 1 fall outside the degenerate-pair regime and are
    rejected.
    """
    two_j = round(2 * SpinSpace(j).j)
    if not (0 < n < two_j):
        raise ConfigError(f"crossing index must satisfy 0 < N < 2J, got N={n}")
    if ratio <= 0:
        raise ConfigError("gamma_y/gamma_x ratio must be positive for a real solution")
    if sign not in (-1, +1):
        raise ConfigError("sign must be -1 or +1")
    product = ((two_j - 1.0) / (two_j - n)) ** 2
    gx = sign * np.sqrt(product / ratio)
    gy = ratio * gx
    if abs(gx) < 1.0 or abs(gy) < 1.0:
        raise SectorDomainError(
            "prediction outside degenerate-pair regime: "
            f"|gamma_x|={abs(gx):.5f}, |gamma_y|={abs(gy):.5f} (both must be >= 1)"
        )
    kind = "avoided-crossing" if n % 2 == 0 else "real-crossing"
    return CrossingPrediction(n=n, kind=kind, product=product, gamma_x=gx, gamma_y=gy)


@dataclass(frozen=True)
class GapRecord:
    """Result of a gap search between two levels along a coupling ray."""

    parity: int  # parity of the pair for same-sector searches; 0 for mixed
    k: int
    k_other: int
    gamma_at_min: float
    gap_min: float
    mean_energy: float
    interior_minimum: bool
    bracket: tuple


def _sector_energies(j, ratio, gamma_x, parity, epsilon0=1.0):
    coup = CouplingParams(gamma_x=gamma_x, gamma_y=ratio * gamma_x, epsilon0=epsilon0)
    plus, minus = build_parity_blocks(SpinSpace(j), coup)
    block = plus if parity == +1 else minus
    return diagonalize(block, want_vectors=False).energies


_GOLDEN = (np.sqrt(5.0) - 1.0) / 2.0


def _golden_minimize(fun, lo, hi, xtol):
    """Plain golden-section minimization on [lo, hi]."""
    a, b = float(lo), float(hi)
    x1 = b - _GOLDEN * (b - a)
    x2 = a + _GOLDEN * (b - a)
    f1, f2 = fun(x1), fun(x2)
    while b - a > xtol:
        if f1 <= f2:
            b, x2, f2 = x2, x1, f1
            x1 = b - _GOLDEN * (b - a)
            f1 = fun(x1)
        else:
            a, x1, f1 = x1, x2, f2
            x2 = a + _GOLDEN * (b - a)
            f2 = fun(x2)
    xm = 0.5 * (a + b)
    return xm, fun(xm)


def locate_minimum_gap(j, ratio, parity, k, bracket, xtol=1e-6, epsilon0=1.0):
    """Minimize E_(k+1) - E_k of one parity sector over gamma_x in ``bracket``.

    If the minimum sits at (within xtol of) an endpoint the record is
    flagged ``interior_minimum=False`` and carries the better endpoint.
    """
    lo, hi = sorted(float(g) for g in bracket)

    def gap(gx):
        e = _sector_energies(j, ratio, gx, parity, epsilon0)
        return e[k + 1] - e[k]

    gx_min, gmin = _golden_minimize(gap, lo, hi, xtol)
    interior = (gx_min - lo > 2.0 * xtol) and (hi - gx_min > 2.0 * xtol)
    if not interior:
        # report the endpoint with the smaller gap
        glo, ghi = gap(lo), gap(hi)
        gx_min, gmin = (lo, glo) if glo <= ghi else (hi, ghi)
    e = _sector_energies(j, ratio, gx_min, parity, epsilon0)
    return GapRecord(
        parity=parity,
        k=k,
        k_other=k + 1,
        gamma_at_min=gx_min,
        gap_min=float(gmin),
        mean_energy=float(0.5 * (e[k] + e[k + 1])),
        interior_minimum=bool(interior),
        bracket=(lo, hi),
    )


def locate_parity_crossing(j, ratio, k_plus, k_minus, bracket, epsilon0=1.0):
    """Locate a real crossing between positive-parity level k_plus and
    negative-parity level k_minus.

    The signed difference E+_(k_plus) - E-_(k_minus) is smooth in
    gamma_x and changes sign at a real crossing, so the root is polished
    to machine precision with Brent's method.  Raises
    NumericalFailureError if the bracket does not straddle a sign
    change.
    """
    lo, hi = sorted(float(g) for g in bracket)

    def diff(gx):
        ep = _sector_energies(j, ratio, gx, +1, epsilon0)
        em = _sector_energies(j, ratio, gx, -1, epsilon0)
        return ep[k_plus] - em[k_minus]

    flo, fhi = diff(lo), diff(hi)
    if np.sign(flo) == np.sign(fhi):
        raise NumericalFailureError(
            f"no sign change of E+[{k_plus}] - E-[{k_minus}] on [{lo}, {hi}]",
            stage="locate_parity_crossing",
        )
    gx_cross = brentq(diff, lo, hi, xtol=1e-14, rtol=8.9e-16)
    ep = _sector_energies(j, ratio, gx_cross, +1, epsilon0)
    em = _sector_energies(j, ratio, gx_cross, -1, epsilon0)
    return GapRecord(
        parity=0,
        k=k_plus,
        k_other=k_minus,
        gamma_at_min=float(gx_cross),
        gap_min=float(abs(ep[k_plus] - em[k_minus])),
        mean_energy=float(0.5 * (ep[k_plus] + em[k_minus])),
        interior_minimum=True,
        bracket=(lo, hi),
    )


def eigencomponents(state, spectra):
    """Components c_k = <E_k|alpha0> of a coherent state per parity sector.

    Returns ``{+1: c_plus, -1: c_minus}`` with complex arrays ordered by
    sector index k.  Completeness guarantees sum |c_k|^2 = 1.
    """
    if state.j != spectra.space.j:
        raise ConfigError("coherent state and spectrum have different J")
    comps = {}
    for parity in (+1, -1):
        sec = spectra.sector(parity)
        if sec.vectors is None:
            raise ConfigError("spectrum was computed without eigenvectors")
        idx = np.round(sec.m_list + spectra.space.j).astype(int)
        comps[parity] = sec.vectors.T @ state.amplitudes[idx]
    return comps


def order_parameter(spectra):
    """<Jz + J>/J on the global ground state (in [0, 2]).

    Zero in the symmetric phase; 1 + 1/gamma_min + O(1/J) in the
    parity-broken phase with gamma_min = min(gamma_x, gamma_y) <= -1.
    """
    ground = []
    for parity in (+1, -1):
        sec = spectra.sector(parity)
        ground.append((sec.energies[0], parity))
    _, parity = min(ground)
    sec = spectra.sector(parity)
    vec = sec.vectors[:, 0]
    jz = float(np.sum(sec.m_list * vec**2))
    j = spectra.space.j
    return (jz + j) / j
