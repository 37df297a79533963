"""Cnoidal and dnoidal standing waves of the Klein-Gordon-Schrodinger systems.

Yukawa coupling (f(s,t) = s) pairs psi = sqrt(2) phi with the cnoidal profile
    phi_c = phi_omega / 4,  phi_omega(x) = b2 + (b3 - b2) cn^2(2K x / L; k),
solving -phi'' + 2c phi - 2 phi^2 = 0.

Cubic coupling (f(s,t) = st) pairs psi = phi with the dnoidal profile
    phi_c(x) = eta dn(eta x; k),  eta = 2K / L,
solving (phi')^2 = -phi^4 + 2c phi^2 + 2B.

Both branches are parametrized by the modulus k; the wave speed c is a strictly
increasing function of k, inverted by bisection.
"""
import logging
import math
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Dict, Union

import numpy as np

from .elliptic import EllipticModulus, complete_K, jacobi
from .errors import DomainError, NoPeriodicWaveError, NumericalError
from .grid import PeriodicGrid, SampledField, spectral_derivative

logger = logging.getLogger(__name__)

MODULUS_CLIP = 1e-12
BISECTION_MAX_ITER = 200
SOLITARY_DECAY = 1e-12
MULTIPLE_RTOL = 1e-12


@dataclass(frozen=True)
class CnoidalParams:
    L: float
    c: float
    omega: float
    k: EllipticModulus
    beta1: float
    beta2: float
    beta3: float
    B: float

    @property
    def alpha(self) -> float:
        """Argument scale sqrt((b3 - b1) / 12) = 2K / L."""
        return math.sqrt((self.beta3 - self.beta1) / 12.0)

    def invariant_defects(self) -> Dict[str, float]:
        """Deviations of the root relations, the modulus and the period identity."""
        b1, b2, b3, w = self.beta1, self.beta2, self.beta3, self.omega
        K = complete_K(self.k)
        return {
            'root_sum': abs(b1 + b2 + b3 - 3 * w) / (3 * w),
            'root_pairs': abs(b2 * b1 + b3 * b1 + b3 * b2) / w ** 2,
            'root_product': abs(b1 * b2 * b3 - 6 * self.B) / abs(6 * self.B),
            'modulus': abs(self.k.k_sq - (b3 - b2) / (b3 - b1)),
            'period': abs(4 * math.sqrt(3) * K / math.sqrt(b3 - b1) - self.L) / self.L,
        }


@dataclass(frozen=True)
class DnoidalParams:
    L: float
    c: float
    k: EllipticModulus
    eta: float
    B: float

    def invariant_defects(self) -> Dict[str, float]:
        K = complete_K(self.k)
        return {
            'speed': abs(2 * K ** 2 * (2 - self.k.k_sq) / self.L ** 2 - self.c) / self.c,
            'eta': abs(2 * K / self.L - self.eta),
        }


@dataclass(frozen=True)
class SolitaryParams:
    c: float
    kind: str


WaveParams = Union[CnoidalParams, DnoidalParams, SolitaryParams]


@dataclass(frozen=True)
class WaveProfile:
    """A sampled positive wave phi_c; the Schrodinger part is psi = psi_ratio * phi."""
    family: str
    params: WaveParams
    phi: SampledField
    psi_ratio: float

    def __post_init__(self):
        if not np.min(self.phi.values) > 0:
            raise DomainError(f'{self.family} profile is not strictly positive')

    @property
    def c(self) -> float:
        return self.params.c

    @property
    def grid(self) -> PeriodicGrid:
        return self.phi.grid

    @property
    def system(self) -> str:
        return 'yukawa' if self.family in ('cnoidal', 'solitary-cn') else 'cubic'

    @property
    def psi(self) -> np.ndarray:
        return self.psi_ratio * self.phi.values

    @property
    def B(self) -> float:
        return getattr(self.params, 'B', 0.0)


def _domain_multiple(g: PeriodicGrid, L: float) -> int:
    ratio = g.length / L
    multiple = int(round(ratio))
    if multiple < 1 or abs(ratio - multiple) > MULTIPLE_RTOL * ratio:
        raise DomainError(f'grid length {g.length!r} is not a multiple of L={L!r}')
    return multiple


class WaveFamily(ABC):
    """A branch of positive L-periodic waves parametrized by the modulus."""
    name = ''
    system = ''
    psi_ratio = 1.0
    threshold_text = ''

    @abstractmethod
    def threshold(self, L: float) -> float:
        """Infimum of the admissible wave speeds for period L."""

    @abstractmethod
    def speed(self, k: EllipticModulus, L: float) -> float:
        """Wave speed c of the member with modulus k."""

    @abstractmethod
    def params(self, k: EllipticModulus, L: float) -> WaveParams:
        pass

    @abstractmethod
    def sample(self, params: WaveParams, x: np.ndarray) -> np.ndarray:
        """Evaluates phi_c at the positions x."""

    def solve_modulus(self, c: float, L: float) -> EllipticModulus:
        """The unique modulus with speed(k, L) = c, by bisection."""
        threshold = self.threshold(L)
        if not c > threshold:
            raise NoPeriodicWaveError(self.name, c, L, threshold, self.threshold_text)
        lo, hi = MODULUS_CLIP, 1.0 - MODULUS_CLIP
        f_lo = self.speed(EllipticModulus.of(lo), L) - c
        f_hi = self.speed(EllipticModulus.of(hi), L) - c
        if f_lo * f_hi > 0:
            if f_lo > 0 and f_lo <= 1e-12 * c:
                return EllipticModulus.of(lo)
            raise NumericalError(
                f'{self.name}: modulus bracket [{lo}, {hi}] does not contain c={c!r}')
        for it in range(BISECTION_MAX_ITER):
            mid = 0.5 * (lo + hi)
            if mid <= lo or mid >= hi:
                break
            f_mid = self.speed(EllipticModulus.of(mid), L) - c
            if f_mid == 0:
                lo = hi = mid
                break
            if (f_mid < 0) == (f_lo < 0):
                lo, f_lo = mid, f_mid
            else:
                hi = mid
        logger.debug('%s modulus for c=%r, L=%r after %d bisection steps',
                     self.name, c, L, it + 1)
        return EllipticModulus.of(0.5 * (lo + hi))

    def params_for(self, c: float, L: float) -> WaveParams:
        return self.params(self.solve_modulus(c, L), L)

    def profile_from(self, params: WaveParams, g: PeriodicGrid) -> WaveProfile:
        _domain_multiple(g, params.L)
        phi = SampledField(g, self.sample(params, g.points))
        return WaveProfile(self.name, params, phi, self.psi_ratio)

    def profile(self, c: float, L: float, g: PeriodicGrid) -> WaveProfile:
        return self.profile_from(self.params_for(c, L), g)


class CnoidalFamily(WaveFamily):
    name = 'cnoidal'
    system = 'yukawa'
    psi_ratio = math.sqrt(2.0)
    threshold_text = '2*pi^2/L^2'

    def threshold(self, L: float) -> float:
        return 2 * math.pi ** 2 / L ** 2

    def speed(self, k: EllipticModulus, L: float) -> float:
        K = complete_K(k)
        return 8 * K ** 2 * math.sqrt(k.kprime_sq + k.k_sq ** 2) / L ** 2

    def params(self, k: EllipticModulus, L: float) -> CnoidalParams:
        K = complete_K(k)
        u = 16 * K ** 2 / L ** 2
        root = math.sqrt(k.kprime_sq + k.k_sq ** 2)
        omega = u * root
        beta3 = u * (root + 1 + k.k_sq)
        # b3 - 48K^2/L^2 and b3 - 48 k^2 K^2/L^2 written without cancellation
        beta1 = u * (root - 1 - k.kprime_sq)
        beta2 = u * (root - 1 + 2 * k.kprime_sq)
        B = beta1 * beta2 * beta3 / 6
        return CnoidalParams(L, omega / 2, omega, k, beta1, beta2, beta3, B)

    def sample(self, params: CnoidalParams, x: np.ndarray) -> np.ndarray:
        cn = jacobi(params.alpha * np.asarray(x), params.k).cn
        return (params.beta2 + (params.beta3 - params.beta2) * cn ** 2) / 4


class DnoidalFamily(WaveFamily):
    name = 'dnoidal'
    system = 'cubic'
    psi_ratio = 1.0
    threshold_text = 'pi^2/L^2'

    def threshold(self, L: float) -> float:
        return math.pi ** 2 / L ** 2

    def speed(self, k: EllipticModulus, L: float) -> float:
        K = complete_K(k)
        return 2 * K ** 2 * (1 + k.kprime_sq) / L ** 2

    def params(self, k: EllipticModulus, L: float) -> DnoidalParams:
        eta = 2 * complete_K(k) / L
        return DnoidalParams(L, self.speed(k, L), k, eta, -0.5 * eta ** 4 * k.kprime_sq)

    def sample(self, params: DnoidalParams, x: np.ndarray) -> np.ndarray:
        return params.eta * jacobi(params.eta * np.asarray(x), params.k).dn


CNOIDAL = CnoidalFamily()
DNOIDAL = DnoidalFamily()
FAMILIES = {CNOIDAL.name: CNOIDAL, DNOIDAL.name: DNOIDAL}


def family_for(name: str) -> WaveFamily:
    try:
        return FAMILIES[name]
    except KeyError:
        raise DomainError(f'unknown wave family {name!r}') from None


def solve_modulus_cnoidal(c: float, L: float) -> EllipticModulus:
    return CNOIDAL.solve_modulus(c, L)


def solve_modulus_dnoidal(c: float, L: float) -> EllipticModulus:
    return DNOIDAL.solve_modulus(c, L)


def cnoidal_params(k: EllipticModulus, L: float) -> CnoidalParams:
    return CNOIDAL.params(k, L)


def dnoidal_params(k: EllipticModulus, L: float) -> DnoidalParams:
    return DNOIDAL.params(k, L)


def cnoidal_profile(p: CnoidalParams, g: PeriodicGrid) -> WaveProfile:
    return CNOIDAL.profile_from(p, g)


def dnoidal_profile(c: float, L: float, g: PeriodicGrid) -> WaveProfile:
    return DNOIDAL.profile(c, L, g)


def make_wave(family: str, c: float, L: float, g: PeriodicGrid) -> WaveProfile:
    return family_for(family).profile(c, L, g)


def wave_derivative(w: WaveProfile) -> SampledField:
    return spectral_derivative(w.phi, 1)


def quadratic_residual(phi: SampledField, c: float) -> np.ndarray:
    """Pointwise -phi'' + 2c phi - 2 phi^2."""
    f = phi.values
    return -spectral_derivative(phi, 2).values + 2 * c * f - 2 * f ** 2


def quartic_residual(phi: SampledField, c: float, B: float) -> np.ndarray:
    """Pointwise (phi')^2 + phi^4 - 2c phi^2 - 2B."""
    f = phi.values
    return spectral_derivative(phi, 1).values ** 2 + f ** 4 - 2 * c * f ** 2 - 2 * B


def local_residual(w: WaveProfile) -> np.ndarray:
    if w.system == 'yukawa':
        return quadratic_residual(w.phi, w.c)
    return quartic_residual(w.phi, w.c, w.B)


def ode_residual(w: WaveProfile) -> float:
    return float(np.max(np.abs(local_residual(w))))


def first_integral_spread(w: WaveProfile) -> float:
    """Grid standard deviation of the first integral of the profile equation.

    Solitary profiles use their branch's integral with omega = 2c and B = 0.
    """
    if w.family in ('cnoidal', 'solitary-cn'):
        f = 4 * w.phi.values
        df = 4 * spectral_derivative(w.phi, 1).values
        integral = df ** 2 - (-f ** 3 + 6 * w.c * f ** 2 + 6 * w.B) / 3
    elif w.family in ('dnoidal', 'solitary-dn'):
        f = w.phi.values
        df = spectral_derivative(w.phi, 1).values
        integral = df ** 2 + f ** 4 - 2 * w.c * f ** 2
    else:
        raise DomainError(f'no first integral for {w.family} profiles')
    return float(np.std(integral))


def beta_consistency(p: CnoidalParams) -> Dict[str, float]:
    """Relative deviation between the (omega, b3) root formulas and the (k, L) forms."""
    w, b3 = p.omega, p.beta3
    disc = math.sqrt(max(9 * w ** 2 + 6 * w * b3 - 3 * b3 ** 2, 0.0))
    from_b3 = {
        'beta2': 0.5 * (3 * w - b3 + disc),
        'beta3_minus_beta1': 0.5 * (3 * b3 - 3 * w + disc),
        'beta3_minus_beta2': 0.5 * (3 * b3 - 3 * w - disc),
        'k_sq': (3 * b3 - 3 * w - disc) / (3 * b3 - 3 * w + disc),
    }
    closed = {
        'beta2': p.beta2,
        'beta3_minus_beta1': p.beta3 - p.beta1,
        'beta3_minus_beta2': p.beta3 - p.beta2,
        'k_sq': p.k.k_sq,
    }
    return {key: abs(from_b3[key] - closed[key]) / abs(closed[key]) for key in closed}


def solitary_shape(c: float, kind: str, x) -> np.ndarray:
    """Solitary limits of the two branches, centered at x = 0.

    yukawa: 3c/2 sech^2(sqrt(c/2) x), the k -> 1 limit of phi_omega / 4
    (its phi_omega amplitude is 6c); cubic: sqrt(2c) sech(sqrt(2c) x), which
    solves (phi')^2 = -phi^4 + 2c phi^2 (a sqrt(c) amplitude does not).
    """
    x = np.asarray(x, dtype=float)
    if kind == 'yukawa':
        return 1.5 * c / np.cosh(math.sqrt(c / 2) * x) ** 2
    if kind == 'cubic':
        return math.sqrt(2 * c) / np.cosh(math.sqrt(2 * c) * x)
    raise DomainError(f'unknown solitary kind {kind!r}')


def solitary_profile(c: float, kind: str, g: PeriodicGrid) -> WaveProfile:
    if not c > 0:
        raise DomainError(f'solitary waves need c > 0, got {c!r}')
    values = solitary_shape(c, kind, g.points - g.length / 2)
    if max(values[0], values[-1]) >= SOLITARY_DECAY * np.max(values):
        raise DomainError(
            f'grid of length {g.length!r} is too short for the {kind} solitary wave at c={c!r}')
    family = 'solitary-cn' if kind == 'yukawa' else 'solitary-dn'
    ratio = math.sqrt(2.0) if kind == 'yukawa' else 1.0
    return WaveProfile(family, SolitaryParams(c, kind), SampledField(g, values), ratio)
