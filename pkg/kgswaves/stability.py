"""Conserved functionals, the convexity criterion and the linearized generator J L.

States are ordered (u1, v, u2, w) with u = u1 + i u2 and w = v_t. The real
block LR acts on (u1, v), the imaginary block LI on (u2, w), and
J(a, b, c, d) = (c/2, d, -a/2, -b).
"""
import logging
import math
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import TYPE_CHECKING, Dict, List, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg
from numpy.polynomial import polynomial as P

from .elliptic import EllipticModulus, ModulusLike, as_modulus, complete_E, complete_K, dE_dk, dK_dk
from .errors import ClaimFailure, DomainError, NumericalError
from .grid import PeriodicGrid, SampledField, quadrature, sobolev_norm, spectral_derivative
from .hillspec import assemble_block, eig_sym
from .waves import (CNOIDAL, DNOIDAL, WaveFamily, WaveProfile, family_for, solve_modulus_cnoidal,
                    solve_modulus_dnoidal, wave_derivative)

if TYPE_CHECKING:
    from .evolve import FieldState

logger = logging.getLogger(__name__)

DEFAULT_N = 256
DIFF_STEP = 1e-4
GROWTH_TOL_FACTOR = 1e-6
SERIES_MODULUS = 0.1
SERIES_TERMS = 30


class InteractionSystem(ABC):
    """The coupling f of the Klein-Gordon-Schrodinger system and its wave branch."""
    name = ''
    family: WaveFamily = None

    @property
    def psi_ratio(self) -> float:
        return self.family.psi_ratio

    @abstractmethod
    def potential(self, v: np.ndarray) -> np.ndarray:
        """Schrodinger potential V in i u_t + u_xx / 2 = -V u."""

    @abstractmethod
    def source(self, u_sq: np.ndarray, v: np.ndarray) -> np.ndarray:
        """Klein-Gordon source s in v_tt - v_xx + m^2 v = s."""

    @abstractmethod
    def coupling(self, u_sq: np.ndarray, v: np.ndarray) -> np.ndarray:
        """Interaction density; the energy carries -coupling."""


class YukawaSystem(InteractionSystem):
    name = 'yukawa'
    family = CNOIDAL

    def potential(self, v):
        return v

    def source(self, u_sq, v):
        return u_sq

    def coupling(self, u_sq, v):
        return v * u_sq


class CubicSystem(InteractionSystem):
    name = 'cubic'
    family = DNOIDAL

    def potential(self, v):
        return v ** 2

    def source(self, u_sq, v):
        return 2 * u_sq * v

    def coupling(self, u_sq, v):
        return v ** 2 * u_sq


SYSTEMS = {'yukawa': YukawaSystem(), 'cubic': CubicSystem()}
FAMILY_SYSTEM = {'cnoidal': 'yukawa', 'dnoidal': 'cubic',
                 'solitary-cn': 'yukawa', 'solitary-dn': 'cubic'}


def system_for(name) -> InteractionSystem:
    if isinstance(name, InteractionSystem):
        return name
    try:
        return SYSTEMS[name]
    except KeyError:
        raise DomainError(f'unknown system {name!r}') from None


def system_of(w: WaveProfile) -> InteractionSystem:
    return SYSTEMS[FAMILY_SYSTEM[w.family]]


def _matching_system(w: WaveProfile, system) -> InteractionSystem:
    if system is None:
        return system_of(w)
    sys_ = system_for(system)
    if FAMILY_SYSTEM[w.family] != sys_.name:
        raise DomainError(f'{w.family} waves belong to the {FAMILY_SYSTEM[w.family]} system, '
                          f'not {sys_.name}')
    return sys_


# --- functionals ----------------------------------------------------------

@dataclass(frozen=True)
class Functionals:
    E: float
    F: float
    c: float

    @property
    def H(self) -> float:
        return self.E + self.c * self.F


def _real(g: PeriodicGrid, values) -> SampledField:
    return SampledField(g, np.asarray(values, dtype=float))


def charge_F(state: 'FieldState') -> float:
    """F = integral of u1^2 + u2^2."""
    return quadrature(_real(state.grid, np.abs(state.u.values) ** 2))


def energy_E(state: 'FieldState', system, c: float) -> float:
    """E = 1/2 integral of |u_x|^2 + w^2 + v_x^2 + 2c v^2 - 2 coupling(|u|^2, v)."""
    sys_ = system_for(system)
    g = state.grid
    u, v, w = state.u.values, state.v.values, state.w.values
    ux = spectral_derivative(state.u, 1).values
    vx = spectral_derivative(state.v, 1).values
    density = (np.abs(ux) ** 2 + w ** 2 + vx ** 2 + 2 * c * v ** 2
               - 2 * sys_.coupling(np.abs(u) ** 2, v))
    return 0.5 * quadrature(_real(g, density))


def functionals(state: 'FieldState', system, c: float) -> Functionals:
    return Functionals(energy_E(state, system, c), charge_F(state), c)


def h_gradient(state: 'FieldState', system, c: float) -> Tuple[np.ndarray, ...]:
    """First variation of H = E + cF as the 4-tuple (u1, v, u2, w)."""
    sys_ = system_for(system)
    u, v, w = state.u.values, state.v.values, state.w.values
    uxx = spectral_derivative(state.u, 2).values
    vxx = spectral_derivative(state.v, 2).values
    grad_u = -uxx + 2 * c * u - 2 * sys_.potential(v) * u
    grad_v = -vxx + 2 * c * v - sys_.source(np.abs(u) ** 2, v)
    return grad_u.real, grad_v, grad_u.imag, w.copy()


def apply_J(x: Sequence[np.ndarray]) -> Tuple[np.ndarray, ...]:
    a, b, c, d = x
    return 0.5 * c, d, -0.5 * a, -b


# --- convexity of d(c) ----------------------------------------------------

def wave_charge(family: str, c: float, L: float, n: int = DEFAULT_N) -> float:
    """F along the wave branch: 2 int phi^2 (cnoidal) or int phi^2 (dnoidal)."""
    fam = family_for(family)
    w = fam.profile(c, L, PeriodicGrid(L, n))
    return fam.psi_ratio ** 2 * quadrature(_real(w.grid, w.phi.values ** 2))


def _central(family: str, c: float, L: float, h: float, n: int) -> float:
    return (wave_charge(family, c + h, L, n) - wave_charge(family, c - h, L, n)) / (2 * h)


def d_second_numeric(c: float, L: float, family: str, h: Optional[float] = None,
                     richardson: bool = True, n: int = DEFAULT_N) -> float:
    """d''(c) = dF/dc by central differences, Richardson-extrapolated once."""
    fam = family_for(family)
    h = DIFF_STEP * c if h is None else h
    threshold = fam.threshold(L)
    if c - 2 * h <= threshold:
        raise DomainError(
            f'c={c!r} is within 2h={2 * h!r} of the {family} threshold {fam.threshold_text}')
    coarse = _central(family, c, L, h, n)
    if not richardson:
        return coarse
    fine = _central(family, c, L, h / 2, n)
    return (4 * fine - coarse) / 3


def _complete_series(terms: int = SERIES_TERMS) -> Tuple[np.ndarray, np.ndarray]:
    """Coefficients in m = k^2 of 2K/pi and 2E/pi."""
    a = np.ones(terms)
    for n in range(1, terms):
        a[n] = a[n - 1] * ((2 * n - 1) / (2 * n)) ** 2
    return a, a / (1 - 2 * np.arange(terms))


def d_second_dnoidal_series(k: ModulusLike, L: float) -> float:
    """Small-modulus form of the dnoidal d''(c) from the series of K and E.

    d(KE)/dm and dc/dm both vanish like m at m = 0; the common factor is
    removed from the coefficients, so the limit L/3 is reached smoothly.
    """
    m = as_modulus(k)
    kc, ec = _complete_series()
    ke = P.polymul(kc, ec)[:SERIES_TERMS]
    # (2K/pi)^2 (1 + k'^2) with 1 + k'^2 = 2 - m
    speed = P.polymul(P.polymul(kc, kc)[:SERIES_TERMS], [2.0, -1.0])[:SERIES_TERMS]
    num = P.polyval(m.k_sq, P.polyder(ke)[1:])
    den = P.polyval(m.k_sq, P.polyder(speed)[1:])
    return 2 * L * num / den


def d_second_dnoidal_elliptic(k: ModulusLike, L: float) -> float:
    """(4/L) d(KE)/dk / (dc/dk), written to cancel the common 1/(k k'^2)."""
    m = as_modulus(k)
    K, E = complete_K(m), complete_E(m)
    num = E * E - m.kprime_sq * K * K
    den = K * ((1 + m.kprime_sq) * E - 2 * m.kprime_sq * K)
    return L * num / den


def d_second_dnoidal_of(k: ModulusLike, L: float) -> float:
    m = as_modulus(k)
    if m.k < SERIES_MODULUS:
        return d_second_dnoidal_series(m, L)
    return d_second_dnoidal_elliptic(m, L)


def d_second_closed_dnoidal(c: float, L: float) -> float:
    """d''(c) = (4/L) d(KE)/dk dk/dc along the dnoidal branch."""
    return d_second_dnoidal_of(solve_modulus_dnoidal(c, L), L)


def f_cnoidal(k: ModulusLike) -> float:
    """f(k) = K^2 [sqrt(1-k^2+k^4) + 1 - 2k^2] + 3K [E - k'^2 K]."""
    m = as_modulus(k)
    K, E = complete_K(m), complete_E(m)
    root = math.sqrt(m.kprime_sq + m.k_sq ** 2)
    return K * K * (root + 1 - 2 * m.k_sq) + 3 * K * (E - m.kprime_sq * K)


def _f_cnoidal_dk(m: EllipticModulus) -> float:
    K, E = complete_K(m), complete_E(m)
    Kp, Ep = dK_dk(m), dE_dk(m)
    k = m.k
    root = math.sqrt(m.kprime_sq + m.k_sq ** 2)
    root_p = (2 * k ** 3 - k) / root
    return (2 * K * Kp * (root + 1 - 2 * k * k) + K * K * (root_p - 4 * k)
            + 3 * Kp * (E - m.kprime_sq * K) + 3 * K * (Ep + 2 * k * K - m.kprime_sq * Kp))


def d_second_closed_cnoidal(c: float, L: float) -> float:
    """d''(c) from F = (8c/L) f(k(c))."""
    m = solve_modulus_cnoidal(c, L)
    K, Kp = complete_K(m), dK_dk(m)
    k = m.k
    root = math.sqrt(m.kprime_sq + m.k_sq ** 2)
    root_p = (2 * k ** 3 - k) / root
    dc_dk = 8 * (2 * K * Kp * root + K * K * root_p) / L ** 2
    return 8 / L * (f_cnoidal(m) + c * _f_cnoidal_dk(m) / dc_dk)


@dataclass(frozen=True)
class MassIntegrals:
    k: float
    L: float
    omega: float
    quadrature: float
    closed: float
    closed_with_omega: float
    f: float
    identity_defect: float


def mass_integral_cnoidal(k: ModulusLike, L: float, n: int = DEFAULT_N) -> MassIntegrals:
    """int_0^L phi_omega by quadrature and by the closed combination (16/L) f(k)."""
    m = as_modulus(k)
    p = CNOIDAL.params(m, L)
    g = PeriodicGrid(L, n)
    phi_omega = 4 * CNOIDAL.sample(p, g.points)
    upsilon = quadrature(_real(g, phi_omega))
    square = quadrature(_real(g, phi_omega ** 2))
    f = f_cnoidal(m)
    return MassIntegrals(
        k=m.k, L=L, omega=p.omega, quadrature=upsilon,
        closed=16 / L * f, closed_with_omega=16 / L * p.omega * f, f=f,
        identity_defect=abs(square - 2 * p.omega * upsilon) / square)


def upsilon_report(k: ModulusLike, L: float, n: int = DEFAULT_N) -> Dict[str, object]:
    mi = mass_integral_cnoidal(k, L, n)
    err_plain = abs(mi.closed - mi.quadrature) / mi.quadrature
    err_omega = abs(mi.closed_with_omega - mi.quadrature) / mi.quadrature
    matching = '(16/L) f(k)' if err_plain <= err_omega else '(16/L) omega f(k)'
    logger.info('mass integral at k=%.6g matches %s (errors %.2e / %.2e)',
                mi.k, matching, err_plain, err_omega)
    return {
        'k': mi.k, 'L': mi.L, 'omega': mi.omega, 'quadrature': mi.quadrature,
        'closed': mi.closed, 'closed_with_omega': mi.closed_with_omega,
        'closed_error': err_plain, 'closed_with_omega_error': err_omega,
        'matching': matching, 'identity_defect': mi.identity_defect,
    }


def d_second_closed(family: str, c: float, L: float) -> float:
    if family == 'cnoidal':
        return d_second_closed_cnoidal(c, L)
    if family == 'dnoidal':
        return d_second_closed_dnoidal(c, L)
    raise DomainError(f'unknown wave family {family!r}')


def d_second_sweep(family: str, L: float, cs: Sequence[float]) -> List[Dict[str, float]]:
    rows = []
    for c in cs:
        numeric = d_second_numeric(c, L, family)
        closed = d_second_closed(family, c, L)
        rows.append({'c': c, 'numeric': numeric, 'closed': closed,
                     'relative_gap': abs(numeric - closed) / abs(closed)})
        logger.debug('%s d\'\'(%.6g) = %.12g (closed %.12g)', family, c, numeric, closed)
    return rows


def d_second_fixed_mass(w: WaveProfile, system=None, zero_tol: Optional[float] = None) -> float:
    """-<LR^-1 F', F'> with F' = (2 psi, 0) and the meson mass frozen at m^2 = 2c.

    This is d''(c) along a branch of one fixed system. The branch behind
    d_second_numeric moves m^2 = 2c together with c; for dnoidal waves
    fixed = d''(c) / 2 - 2 <L3^-1 phi, phi>, which is negative.
    Positive means the charge constraint removes one negative direction of LR.
    """
    _matching_system(w, system)
    LR = assemble_block('LR' + ('cn' if w.family == 'cnoidal' else 'dn'), w)
    spec = eig_sym(LR, zero_tol, want_vectors=True)
    spec.check_unambiguous()
    # F' is even about the crest and ker LR = span(phi') is odd
    keep = np.flatnonzero(np.abs(spec.eigenvalues) > spec.zero_tol)
    grad = np.concatenate([2 * w.psi, np.zeros(w.grid.n)])
    coef = spec.vectors(keep).T @ grad
    value = -w.grid.spacing * float(np.sum(coef ** 2 / spec.eigenvalues[keep]))
    logger.info('%s fixed-mass convexity on length %r: %.10g', w.family, w.grid.length, value)
    return value


# --- instability index ----------------------------------------------------

@dataclass(frozen=True)
class IndexReport:
    n_LR: int
    n_LR_hat: int
    n_LI_inv_hat: int
    cone_dim: int
    kernel_LR: int
    kernel_LI: int

    @property
    def index(self) -> int:
        return max(self.n_LR_hat, self.n_LI_inv_hat) - self.cone_dim


def modified_gram_schmidt(vectors: np.ndarray, tol: float = 1e-10) -> np.ndarray:
    """Orthonormal columns spanning the given columns; dependent ones are dropped."""
    basis = []
    for v in np.asarray(vectors, dtype=float).T:
        q = v.copy()
        for b in basis:
            q -= np.dot(b, q) * b
        norm = np.linalg.norm(q)
        if norm > tol * np.linalg.norm(v):
            basis.append(q / norm)
    return np.array(basis).T.reshape(len(vectors), len(basis))


def instability_index(w: WaveProfile, system=None,
                      zero_tol: Optional[float] = None) -> IndexReport:
    """Negative directions of LR on the complement of the kernels of LR and LI.

    ker LI = span((phi, 0)) is the charge gradient, so on [0, L] the count is
    n(LR) - 1 = 0 when d_second_fixed_mass > 0 (cnoidal) and n(LR) = 1 otherwise
    (dnoidal), not the unconstrained 1.
    """
    _matching_system(w, system)
    suffix = 'cn' if w.family == 'cnoidal' else 'dn'
    LR = assemble_block('LR' + suffix, w)
    LI = assemble_block('LI' + suffix, w)
    spec_R = eig_sym(LR, zero_tol, want_vectors=True)
    spec_I = eig_sym(LI, zero_tol, want_vectors=True)
    spec_R.check_unambiguous()
    spec_I.check_unambiguous()
    if not abs(spec_I.eigenvalues[0]) <= spec_I.zero_tol:
        raise ClaimFailure(f'LI has lowest eigenvalue {spec_I.eigenvalues[0]!r}, expected 0')

    kernels = np.hstack([spec_R.vectors(spec_R.kernel_indices()),
                         spec_I.vectors(spec_I.kernel_indices())])
    basis = modified_gram_schmidt(kernels)
    Z = scipy.linalg.null_space(basis.T)
    restricted_R = np.linalg.eigvalsh(Z.T @ LR.entries @ Z)
    restricted_I = np.linalg.eigvalsh(Z.T @ LI.entries @ Z)
    if restricted_I[0] <= spec_I.zero_tol:
        raise ClaimFailure(f'LI is not positive on the kernel complement '
                           f'(lowest {restricted_I[0]!r})')
    report = IndexReport(
        n_LR=spec_R.n_negative,
        n_LR_hat=int(np.sum(restricted_R < -spec_R.zero_tol)),
        n_LI_inv_hat=0, cone_dim=0,
        kernel_LR=spec_R.kernel_dim, kernel_LI=spec_I.kernel_dim)
    logger.info('%s index on length %r: n(LR)=%d, restricted %d',
                w.family, w.grid.length, report.n_LR, report.n_LR_hat)
    return report


# --- linearized generator --------------------------------------------------

@dataclass(frozen=True)
class LinearizedSpectrum:
    sigma_max: float
    growth_rates: np.ndarray
    tolerance: float
    unstable_mode: Optional[Tuple[np.ndarray, ...]] = None
    eigenvalues: Optional[np.ndarray] = None

    @property
    def unstable(self) -> bool:
        return self.sigma_max > self.tolerance

    @property
    def n_unstable(self) -> int:
        return int(np.sum(self.growth_rates > self.tolerance))

    def symmetry_defect(self) -> float:
        """Distance of the spectrum from its images under -lambda and conj(lambda)."""
        if self.eigenvalues is None:
            raise DomainError('full spectrum was not computed')
        lam = self.eigenvalues
        scale = np.max(np.abs(lam))
        worst = 0.0
        for image in (-lam, np.conj(lam)):
            dist = np.abs(image[:, None] - lam[None, :]).min(axis=1)
            worst = max(worst, float(np.max(dist)))
        return worst / scale

    def max_real_part(self) -> float:
        if self.eigenvalues is None:
            raise DomainError('full spectrum was not computed')
        return float(np.max(self.eigenvalues.real))


def _half_weights(n: int) -> np.ndarray:
    return np.concatenate([np.full(n, 0.5), np.ones(n)])


def generator_matrix(w: WaveProfile, system=None) -> np.ndarray:
    """J L as a dense 4N x 4N matrix on (u1, v, u2, w)."""
    _matching_system(w, system)
    suffix = 'cn' if w.family == 'cnoidal' else 'dn'
    LR = assemble_block('LR' + suffix, w).entries
    LI = assemble_block('LI' + suffix, w).entries
    D1 = _half_weights(w.grid.n)[:, None]
    zero = np.zeros_like(LR)
    return np.block([[zero, D1 * LI], [-D1 * LR, zero]])


def x_norm_of(mode: Sequence[np.ndarray], g: PeriodicGrid) -> float:
    u1, v, u2, wv = mode
    parts = (sobolev_norm(SampledField(g, u1)) ** 2 + sobolev_norm(SampledField(g, v)) ** 2
             + sobolev_norm(SampledField(g, u2)) ** 2 + sobolev_norm(SampledField(g, wv), 0) ** 2)
    return math.sqrt(parts)


def growth_rates(w: WaveProfile, system=None) -> Tuple[np.ndarray, np.ndarray]:
    """Real growth rates of J L from R x = mu Mq^-1 x, mu = -sigma^2.

    lambda V_R = D LI V_I and lambda V_I = -D LR V_R with D = diag(1/2, 1), so
    lambda^2 V_R = -M LR V_R with M = D LI D. V_R lies in the complement of
    (phi, 0) = ker M, where Mq = Q^T M Q is positive definite. The translation
    mode of LR is deflated. Returns the rates in decreasing order and the
    matching V_R as columns; their number equals instability_index(w).index.
    """
    _matching_system(w, system)
    suffix = 'cn' if w.family == 'cnoidal' else 'dn'
    n = w.grid.n
    LR = assemble_block('LR' + suffix, w).entries
    LI = assemble_block('LI' + suffix, w).entries
    d = _half_weights(n)
    M = d[:, None] * LI * d[None, :]

    phi0 = np.concatenate([w.phi.values, np.zeros(n)])
    Q = scipy.linalg.null_space(phi0[None, :] / np.linalg.norm(phi0))
    Mq = Q.T @ M @ Q
    R = Q.T @ LR @ Q
    try:
        B = scipy.linalg.inv(0.5 * (Mq + Mq.T))
    except scipy.linalg.LinAlgError as e:
        raise NumericalError(f'reduced LI is singular: {e}') from e
    B = 0.5 * (B + B.T)

    dphi = wave_derivative(w).values
    ratio = 1 / math.sqrt(2.0) if suffix == 'cn' else 1.0
    z = Q.T @ np.concatenate([dphi, ratio * dphi])
    P = scipy.linalg.null_space((B @ z)[None, :] / np.linalg.norm(B @ z))
    try:
        mu, vecs = scipy.linalg.eigh(P.T @ R @ P, P.T @ B @ P)
    except (scipy.linalg.LinAlgError, ValueError) as e:
        raise NumericalError(f'generalized eigenproblem failed: {e}') from e
    negative = mu < 0
    sigmas = np.sqrt(-mu[negative])
    order = np.argsort(sigmas)[::-1]
    return sigmas[order], (Q @ P @ vecs[:, negative])[:, order]


def linearized_spectrum(w: WaveProfile, system=None, full: bool = True) -> LinearizedSpectrum:
    """Growth rates, the dominant unstable mode and optionally the full spectrum of J L."""
    sys_ = _matching_system(w, system)
    g = w.grid
    n = g.n
    tol = GROWTH_TOL_FACTOR * 2 * w.c
    sigmas, modes = growth_rates(w, sys_)
    sigma_max = float(sigmas[0]) if sigmas.size else 0.0

    mode = None
    if sigma_max > tol:
        LR = assemble_block('LR' + ('cn' if w.family == 'cnoidal' else 'dn'), w).entries
        vr = modes[:, 0]
        d = _half_weights(n)
        vi = -d * (LR @ vr) / sigma_max
        parts = (vr[:n], vr[n:], vi[:n], vi[n:])
        norm = x_norm_of(parts, g)
        flat = np.concatenate(parts)
        sign = 1.0 if flat[np.argmax(np.abs(flat))] > 0 else -1.0
        mode = tuple(sign * p / norm for p in parts)
        logger.info('%s on length %r: unstable with sigma_max=%.8g', w.family, g.length, sigma_max)
    else:
        logger.info('%s on length %r: no growth above %.1e', w.family, g.length, tol)

    eigenvalues = None
    if full:
        try:
            eigenvalues = scipy.linalg.eigvals(generator_matrix(w, sys_))
        except (scipy.linalg.LinAlgError, ValueError) as e:
            raise NumericalError(f'eig of J L failed: {e}') from e
    return LinearizedSpectrum(sigma_max, sigmas, tol, mode, eigenvalues)
