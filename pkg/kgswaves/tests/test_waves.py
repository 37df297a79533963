import math

import numpy as np
import pytest
import scipy.optimize
import scipy.special

from ..elliptic import EllipticModulus
from ..errors import DomainError, NoPeriodicWaveError
from ..grid import PeriodicGrid, SampledField
from ..stability import wave_charge
from ..waves import (CNOIDAL, DNOIDAL, WaveProfile, beta_consistency, cnoidal_params, cnoidal_profile,
                     dnoidal_params, dnoidal_profile, family_for, first_integral_spread,
                     make_wave, ode_residual, quadratic_residual, quartic_residual,
                     solitary_profile, solitary_shape, solve_modulus_cnoidal,
                     solve_modulus_dnoidal)

L = 2 * math.pi


def cnoidal_speed_oracle(k, L):
    K = scipy.special.ellipk(k * k)
    return 8 * K ** 2 * math.sqrt(1 - k * k + k ** 4) / L ** 2


def do_test_residual(family, c, n=256):
    g = PeriodicGrid(L, n)
    w = make_wave(family, c, L, g)
    assert ode_residual(w) <= 1e-8
    return w


def test_threshold_rejects_slow_waves():
    for c in (CNOIDAL.threshold(L), 0.5 * CNOIDAL.threshold(L), -1.0):
        with pytest.raises(NoPeriodicWaveError) as info:
            solve_modulus_cnoidal(c, L)
        assert '2*pi^2/L^2' in str(info.value)
    with pytest.raises(NoPeriodicWaveError) as info:
        solve_modulus_dnoidal(DNOIDAL.threshold(L), L)
    assert 'pi^2/L^2' in str(info.value)


def test_thresholds():
    assert CNOIDAL.threshold(L) == pytest.approx(0.5)
    assert DNOIDAL.threshold(L) == pytest.approx(0.25)


@pytest.mark.parametrize('factor', [1.01, 1.5, 3.0, 10.0])
def test_cnoidal_modulus_matches_independent_root(factor):
    c = factor * CNOIDAL.threshold(L)
    k = solve_modulus_cnoidal(c, L)
    expected = scipy.optimize.brentq(lambda q: cnoidal_speed_oracle(q, L) - c, 1e-6, 1 - 1e-12,
                                     xtol=1e-15)
    assert k.k == pytest.approx(expected, abs=1e-10)
    assert CNOIDAL.speed(k, L) == pytest.approx(c, rel=1e-10)


@pytest.mark.parametrize('k', [0.1, 0.5, 0.8, 0.99])
def test_dnoidal_modulus_round_trip(k):
    c = DNOIDAL.speed(EllipticModulus.of(k), L)
    assert solve_modulus_dnoidal(c, L).k == pytest.approx(k, abs=1e-10)


def test_near_threshold_modulus_is_small():
    k = solve_modulus_cnoidal(CNOIDAL.threshold(L) * (1 + 1e-10), L)
    assert k.k < 0.05
    k = solve_modulus_dnoidal(DNOIDAL.threshold(L) * (1 + 1e-10), L)
    assert k.k < 0.05


@pytest.mark.parametrize('family', [CNOIDAL, DNOIDAL])
def test_modulus_bracket_ends(family):
    lowest = np.nextafter(family.threshold(L), np.inf)
    k = family.solve_modulus(lowest, L)
    assert 0 < k.k < 0.05
    assert family.speed(k, L) == pytest.approx(lowest, rel=1e-14)

    k_top = EllipticModulus.of(1 - 1e-9)
    k = family.solve_modulus(family.speed(k_top, L), L)
    assert k.k == pytest.approx(k_top.k, abs=1e-12)


def test_speed_is_increasing_in_modulus():
    ks = [EllipticModulus.of(k) for k in np.linspace(0.01, 0.99, 99)]
    for family in (CNOIDAL, DNOIDAL):
        speeds = np.array([family.speed(k, L) for k in ks])
        assert np.all(np.diff(speeds) > 0)
        assert speeds[0] > family.threshold(L)


@pytest.mark.parametrize('k', [0.05, 0.3, 0.5, 0.7, 0.9, 0.99])
def test_cnoidal_root_relations(k):
    p = cnoidal_params(EllipticModulus.of(k), L)
    assert max(p.invariant_defects().values()) <= 1e-10
    assert p.beta1 < 0 < p.beta2 < 2 * p.omega < p.beta3 < 3 * p.omega
    assert p.c == pytest.approx(p.omega / 2)
    assert p.alpha == pytest.approx(2 * scipy.special.ellipk(k * k) / L, rel=1e-12)


def test_cnoidal_limits():
    p = cnoidal_params(EllipticModulus.of(1e-6), L)
    assert p.beta1 / p.omega == pytest.approx(-1, abs=1e-9)
    assert p.beta2 / p.omega == pytest.approx(2, abs=1e-9)
    assert p.beta3 / p.omega == pytest.approx(2, abs=1e-9)
    p = cnoidal_params(EllipticModulus.of(1 - 1e-9), L)
    assert p.beta1 / p.omega == pytest.approx(0, abs=1e-8)
    assert p.beta2 / p.omega == pytest.approx(0, abs=1e-8)
    assert p.beta3 / p.omega == pytest.approx(3, abs=1e-8)


@pytest.mark.parametrize('k', [0.3, 0.5, 0.7, 0.9])
def test_beta_formulas_agree(k):
    deviations = beta_consistency(cnoidal_params(EllipticModulus.of(k), L))
    assert set(deviations) == {'beta2', 'beta3_minus_beta1', 'beta3_minus_beta2', 'k_sq'}
    assert max(deviations.values()) <= 1e-10


@pytest.mark.parametrize('k', [0.1, 0.5, 0.9])
def test_dnoidal_params(k):
    p = dnoidal_params(EllipticModulus.of(k), L)
    assert max(p.invariant_defects().values()) <= 1e-12
    assert p.B < 0
    assert p.B == pytest.approx(-0.5 * p.eta ** 4 * (1 - k * k))


def test_cnoidal_profile_extremes():
    p = cnoidal_params(EllipticModulus.of(0.5), L)
    g = PeriodicGrid(L, 128)
    w = cnoidal_profile(p, g)
    assert w.phi.values[0] == pytest.approx(p.beta3 / 4, rel=1e-14)
    assert w.phi.values[g.n // 2] == pytest.approx(p.beta2 / 4, rel=1e-12)
    assert np.max(w.phi.values) == w.phi.values[0]
    assert np.allclose(w.psi, math.sqrt(2) * w.phi.values)
    assert w.system == 'yukawa'


def test_dnoidal_profile_extremes():
    c = DNOIDAL.speed(EllipticModulus.of(0.8), L)
    g = PeriodicGrid(L, 128)
    w = dnoidal_profile(c, L, g)
    eta = w.params.eta
    assert w.phi.values[0] == pytest.approx(eta, rel=1e-12)
    assert w.phi.values[g.n // 2] == pytest.approx(eta * 0.6, rel=1e-10)
    assert np.array_equal(w.psi, w.phi.values)
    assert w.system == 'cubic'


@pytest.mark.parametrize('factor', np.linspace(1.1, 10.0, 20))
def test_cnoidal_ode_residual(factor):
    w = do_test_residual('cnoidal', factor * CNOIDAL.threshold(L))
    assert first_integral_spread(w) <= 1e-8 * w.params.omega ** 3


@pytest.mark.parametrize('factor', np.linspace(1.1, 10.0, 20))
def test_dnoidal_ode_residual(factor):
    w = do_test_residual('dnoidal', factor * DNOIDAL.threshold(L))
    assert first_integral_spread(w) <= 1e-8 * max(1.0, w.c ** 2)


def test_residual_decays_with_resolution():
    p = cnoidal_params(EllipticModulus.of(0.99), L)
    coarse = ode_residual(cnoidal_profile(p, PeriodicGrid(L, 32)))
    fine = ode_residual(cnoidal_profile(p, PeriodicGrid(L, 128)))
    assert coarse > 100 * fine


@pytest.mark.parametrize('family', [CNOIDAL, DNOIDAL])
def test_spectral_decay_of_residual(family):
    p = family.params(EllipticModulus.from_complement(1e-12), L)
    r128, r256, r512 = (ode_residual(family.profile_from(p, PeriodicGrid(L, n)))
                        for n in (128, 256, 512))
    scale = max(1.0, np.max(family.profile_from(p, PeriodicGrid(L, 128)).phi.values) ** 2)
    assert r256 <= 1e-2 * r128
    assert r512 <= max(1e-2 * r256, 1e-10 * scale)


def do_test_branch_derivatives(family, c, fields):
    def params(speed):
        return family_for(family).params_for(speed, L)

    def derivative(name, h):
        return (_field(params(c + h), name) - _field(params(c - h), name)) / (2 * h)

    h = 1e-3 * c
    for name in fields:
        coarse, fine = derivative(name, h), derivative(name, h / 2)
        # beta1 turns around along the cnoidal branch
        floor = 1e-5 * (1 + abs(_field(params(c), name))) / c
        assert np.isfinite(fine)
        assert abs(coarse - fine) <= 1e-3 * abs(fine) + floor


def _field(p, name):
    return p.k.k if name == 'k' else getattr(p, name)


@pytest.mark.parametrize('family,fields', [('cnoidal', ('k', 'beta1', 'beta2', 'beta3')),
                                           ('dnoidal', ('k', 'eta', 'B'))])
def test_branch_is_smooth_and_monotone(family, fields):
    fam = family_for(family)
    cs = np.linspace(1.1, 10.0, 20) * fam.threshold(L)
    ks = np.array([fam.solve_modulus(c, L).k for c in cs])
    charges = np.array([wave_charge(family, c, L) for c in cs])
    assert np.all(np.diff(ks) > 0)
    assert np.all(np.diff(charges) > 0)
    for c in cs:
        do_test_branch_derivatives(family, c, fields)


def test_residual_of_shifted_profile():
    w = make_wave('cnoidal', 0.6, L, PeriodicGrid(L, 128))
    eps = 1e-3
    shifted = w.phi.with_values(w.phi.values + eps)
    expected = np.max(np.abs((2 * w.c - 4 * w.phi.values - 2 * eps) * eps))
    assert np.max(np.abs(quadratic_residual(shifted, w.c))) == pytest.approx(expected, rel=1e-6)


def test_zero_field_residuals():
    zero = SampledField(PeriodicGrid(L, 32), np.zeros(32))
    assert np.max(np.abs(quadratic_residual(zero, 1.0))) == 0
    assert np.max(np.abs(quartic_residual(zero, 1.0, 0.0))) == 0


def test_doubled_domain_is_periodic():
    for family, c in (('cnoidal', 0.6), ('dnoidal', 0.275)):
        g = PeriodicGrid(2 * L, 256)
        w = make_wave(family, c, L, g)
        values = w.phi.values
        assert np.max(np.abs(values[:128] - values[128:])) <= 1e-12 * np.max(values)
        assert ode_residual(w) <= 1e-8


def test_grid_must_cover_whole_periods():
    with pytest.raises(DomainError):
        make_wave('cnoidal', 0.6, L, PeriodicGrid(1.5 * L, 96))
    with pytest.raises(DomainError):
        make_wave('sinusoidal', 0.6, L, PeriodicGrid(L, 64))
    with pytest.raises(DomainError):
        family_for('sinusoidal')


def test_solitary_profiles():
    g = PeriodicGrid(80.0, 1024)
    w = solitary_profile(1.0, 'yukawa', g)
    assert np.max(w.phi.values) == pytest.approx(1.5, rel=1e-14)
    assert w.phi.values[g.n // 2] == np.max(w.phi.values)
    assert w.system == 'yukawa'
    w = solitary_profile(1.0, 'cubic', g)
    assert np.max(w.phi.values) == pytest.approx(math.sqrt(2), rel=1e-14)
    assert w.system == 'cubic'
    assert w.B == 0.0


def test_solitary_needs_decay():
    with pytest.raises(DomainError):
        solitary_profile(1.0, 'yukawa', PeriodicGrid(20.0, 256))
    with pytest.raises(DomainError):
        solitary_profile(-1.0, 'cubic', PeriodicGrid(80.0, 256))
    with pytest.raises(DomainError):
        solitary_shape(1.0, 'quintic', 0.0)


@pytest.mark.parametrize('family,kind', [(CNOIDAL, 'yukawa'), (DNOIDAL, 'cubic')])
def test_periodic_waves_approach_solitary_limit(family, kind):
    g = PeriodicGrid(L, 512)
    p = family.params(EllipticModulus.of(1 - 1e-6), L)
    w = family.profile_from(p, g)
    x = np.remainder(g.points + L / 2, L) - L / 2
    near = np.abs(x) <= L / 4
    limit = solitary_shape(w.c, kind, x[near])
    amplitude = np.max(limit)
    assert np.max(np.abs(w.phi.values[near] - limit)) <= 1e-3 * amplitude


def test_first_integral_of_solitary_profiles():
    g = PeriodicGrid(80.0, 1024)
    c = 1.0
    w = solitary_profile(c, 'yukawa', g)
    assert first_integral_spread(w) <= 1e-8 * max(1.0, (2 * c) ** 3)
    as_cubic = WaveProfile('solitary-dn', w.params, w.phi, 1.0)
    assert first_integral_spread(as_cubic) > 1e-3
    w = solitary_profile(c, 'cubic', g)
    assert first_integral_spread(w) <= 1e-8 * max(1.0, c ** 2)


def test_first_integral_needs_known_family():
    w = make_wave('cnoidal', 0.6, L, PeriodicGrid(L, 64))
    with pytest.raises(DomainError):
        first_integral_spread(WaveProfile('sinusoidal', w.params, w.phi, 1.0))
