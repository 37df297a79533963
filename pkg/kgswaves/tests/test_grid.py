import math

import numpy as np
import pytest

from ..errors import DomainError
from ..grid import (PeriodicGrid, SampledField, dft_forward, dft_inverse, quadrature, sample,
                    second_derivative_matrix, sobolev_inner, sobolev_norm, spectral_derivative,
                    translate)


def random_trig_poly(g, n_modes, seed):
    rng = np.random.default_rng(seed)
    a, b = rng.normal(size=n_modes), rng.normal(size=n_modes)
    x = g.points
    values = sum(a[m] * np.cos(2 * math.pi * m * x / g.length)
                 + b[m] * np.sin(2 * math.pi * m * x / g.length) for m in range(n_modes))
    return SampledField(g, values)


def test_grid_validation():
    for length, n in ((0.0, 32), (-1.0, 32), (1.0, 15), (1.0, 33), (1.0, 8)):
        with pytest.raises(DomainError):
            PeriodicGrid(length, n)
    with pytest.raises(DomainError):
        SampledField(PeriodicGrid(1.0, 16), np.zeros(17))


def test_grid_layout():
    g = PeriodicGrid(2 * math.pi, 16)
    assert g.points[0] == 0.0
    assert g.spacing == pytest.approx(2 * math.pi / 16)
    assert g.modes[g.nyquist] == -8
    assert sorted(g.modes) == list(range(-8, 8))
    d = g.doubled()
    assert d.n == 32 and d.spacing == g.spacing
    assert g.refine(2) == PeriodicGrid(2 * math.pi, 32)


def test_dft_matches_direct_sum():
    g = PeriodicGrid(3.0, 32)
    f = random_trig_poly(g, 10, seed=1)
    x, xi = g.points, g.wavenumbers
    direct = np.array([np.sum(f.values * np.exp(-1j * q * x)) for q in xi]) / g.n
    assert np.max(np.abs(dft_forward(f) - direct)) <= 1e-13
    back = dft_inverse(dft_forward(f), g, real=True)
    assert np.max(np.abs(back.values - f.values)) <= 1e-13


def test_spectral_derivatives():
    g = PeriodicGrid(2 * math.pi, 64)
    f = sample(g, lambda x: np.sin(3 * x))
    assert np.max(np.abs(spectral_derivative(f).values - 3 * np.cos(3 * g.points))) <= 1e-12
    assert np.max(np.abs(spectral_derivative(f, 2).values + 9 * f.values)) <= 1e-11
    with pytest.raises(DomainError):
        spectral_derivative(f, 3)


def test_derivative_keeps_real_fields_real():
    g = PeriodicGrid(1.0, 32)
    f = random_trig_poly(g, 17, seed=3)
    assert spectral_derivative(f).is_real
    assert not spectral_derivative(f.with_values(f.values.astype(complex))).is_real


def test_quadrature_and_norms():
    g = PeriodicGrid(2 * math.pi, 32)
    assert quadrature(sample(g, lambda x: np.cos(x) ** 2)) == pytest.approx(math.pi, rel=1e-14)
    for m in (1, 4, 7):
        f = sample(g, lambda x: np.sin(m * x))
        assert sobolev_norm(f) ** 2 == pytest.approx((1 + m * m) * math.pi, rel=1e-13)
        assert sobolev_norm(f, 0) ** 2 == pytest.approx(math.pi, rel=1e-13)
        assert sobolev_inner(f, f).real == pytest.approx(sobolev_norm(f) ** 2, rel=1e-14)
    with pytest.raises(DomainError):
        quadrature(SampledField(g, np.ones(32, dtype=complex)))


def test_translate_shifts_argument():
    g = PeriodicGrid(2 * math.pi, 32)
    f = sample(g, lambda x: np.sin(2 * x) + 0.5 * np.cos(5 * x))
    for y in (0.3, -1.234, 2 * math.pi / 32):
        shifted = translate(f, y)
        expected = np.sin(2 * (g.points + y)) + 0.5 * np.cos(5 * (g.points + y))
        assert np.max(np.abs(shifted.values - expected)) <= 1e-13
        assert shifted.is_real


def test_second_derivative_matrix():
    g = PeriodicGrid(5.0, 48)
    D2 = second_derivative_matrix(g)
    assert np.array_equal(D2, D2.T)
    v = np.random.default_rng(5).normal(size=g.n)
    expected = spectral_derivative(SampledField(g, v), 2).values
    assert np.max(np.abs(D2 @ v - expected)) <= 1e-10 * np.max(np.abs(expected))
