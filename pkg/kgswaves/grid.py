"""Periodic spectral calculus on uniform grids.

Coefficients follow the forward-normalized convention
f_hat[m] = (1/n) * sum_j f_j exp(-i xi_m x_j), xi_m = 2 pi m / length, and are
stored in FFT order; PeriodicGrid.modes gives the integer mode of each slot
(m in {-n/2, ..., n/2 - 1}).
"""
import logging
from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.fft
import scipy.linalg

from .errors import DomainError

logger = logging.getLogger(__name__)

MIN_POINTS = 16


def _frozen(arr: np.ndarray) -> np.ndarray:
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True)
class PeriodicGrid:
    """n uniform samples x_j = j * length / n of the periodic domain [0, length)."""
    length: float
    n: int

    def __post_init__(self):
        if not self.length > 0:
            raise DomainError(f'grid length must be positive, got {self.length!r}')
        if self.n < MIN_POINTS or self.n % 2:
            raise DomainError(
                f'grid size must be an even integer >= {MIN_POINTS}, got {self.n!r}')

    @property
    def spacing(self) -> float:
        return self.length / self.n

    @cached_property
    def points(self) -> np.ndarray:
        return _frozen(np.arange(self.n) * (self.length / self.n))

    @cached_property
    def modes(self) -> np.ndarray:
        return _frozen(np.rint(scipy.fft.fftfreq(self.n, 1.0 / self.n)).astype(int))

    @cached_property
    def wavenumbers(self) -> np.ndarray:
        return _frozen(2.0 * np.pi * self.modes / self.length)

    @cached_property
    def nyquist(self) -> int:
        """FFT-order index of the unpaired mode -n/2."""
        return self.n // 2

    def doubled(self) -> 'PeriodicGrid':
        """The grid over [0, 2 * length) with the same spacing."""
        return PeriodicGrid(2.0 * self.length, 2 * self.n)

    def refine(self, factor: int) -> 'PeriodicGrid':
        return PeriodicGrid(self.length, self.n * factor)


@dataclass(frozen=True)
class SampledField:
    grid: PeriodicGrid
    values: np.ndarray

    def __post_init__(self):
        values = np.asarray(self.values)
        if values.shape != (self.grid.n,):
            raise DomainError(
                f'field has shape {values.shape}, grid expects ({self.grid.n},)')
        object.__setattr__(self, 'values', values)

    @property
    def is_real(self) -> bool:
        return not np.iscomplexobj(self.values)

    def with_values(self, values) -> 'SampledField':
        return SampledField(self.grid, values)


def sample(g: PeriodicGrid, func) -> SampledField:
    """Samples func on the grid points."""
    return SampledField(g, func(g.points))


def dft_forward(f: SampledField) -> np.ndarray:
    return scipy.fft.fft(f.values, norm='forward')


def dft_inverse(coeffs: np.ndarray, g: PeriodicGrid, real: bool = False) -> SampledField:
    values = scipy.fft.ifft(coeffs, norm='forward')
    return SampledField(g, values.real if real else values)


def derivative_symbol(g: PeriodicGrid, order: int) -> np.ndarray:
    if order not in (1, 2):
        raise DomainError(f'derivative order must be 1 or 2, got {order!r}')
    symbol = (1j * g.wavenumbers) ** order
    if order % 2:
        # odd orders drop the unpaired Nyquist mode: keeps real fields real
        symbol[g.nyquist] = 0.0
    return symbol


def spectral_derivative(f: SampledField, order: int = 1) -> SampledField:
    coeffs = dft_forward(f) * derivative_symbol(f.grid, order)
    return dft_inverse(coeffs, f.grid, real=f.is_real)


def quadrature(f: SampledField) -> float:
    """Periodic trapezoid rule: every weight equals length / n."""
    if not f.is_real:
        raise DomainError('quadrature expects a real field')
    return float(np.sum(f.values) * f.grid.spacing)


def sobolev_inner(f: SampledField, h: SampledField, s: int = 1) -> complex:
    """<f, h>_{H^s} = length * sum (1 + xi^2)^s f_hat conj(h_hat)."""
    weight = (1.0 + f.grid.wavenumbers ** 2) ** s
    return complex(f.grid.length * np.sum(weight * dft_forward(f) * np.conj(dft_forward(h))))


def sobolev_norm(f: SampledField, s: int = 1) -> float:
    weight = (1.0 + f.grid.wavenumbers ** 2) ** s
    return float(np.sqrt(f.grid.length * np.sum(weight * np.abs(dft_forward(f)) ** 2)))


def translation_factors(g: PeriodicGrid, y: float) -> np.ndarray:
    factors = np.exp(1j * g.wavenumbers * y)
    # the unpaired mode is shifted symmetrically so real fields stay real
    factors[g.nyquist] = np.cos(g.wavenumbers[g.nyquist] * y)
    return factors


def translate(f: SampledField, y: float) -> SampledField:
    """T_y f(x) = f(x + y) through the trigonometric interpolant."""
    coeffs = dft_forward(f) * translation_factors(f.grid, y)
    return dft_inverse(coeffs, f.grid, real=f.is_real)


def second_derivative_matrix(g: PeriodicGrid) -> np.ndarray:
    """Dense Fourier-collocation matrix of d^2/dx^2 (real, symmetric circulant)."""
    column = scipy.fft.ifft(-g.wavenumbers ** 2).real
    D2 = scipy.linalg.circulant(column)
    logger.debug('collocation matrix of size %d for length %r', g.n, g.length)
    return 0.5 * (D2 + D2.T)
