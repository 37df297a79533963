import math

import numpy as np
import pytest

from ..elliptic import EllipticModulus, complete_E, complete_K
from ..errors import DomainError
from ..evolve import state_from, wave_state
from ..grid import PeriodicGrid
from ..hillspec import assemble_block, assemble_named
from ..stability import (SERIES_MODULUS, apply_J, charge_F, d_second_closed,
                         d_second_closed_cnoidal, d_second_closed_dnoidal,
                         d_second_dnoidal_elliptic, d_second_dnoidal_of,
                         d_second_dnoidal_series, d_second_fixed_mass, d_second_numeric,
                         d_second_sweep, energy_E, f_cnoidal, functionals, generator_matrix,
                         h_gradient, instability_index, linearized_spectrum,
                         mass_integral_cnoidal, modified_gram_schmidt, system_for,
                         upsilon_report, wave_charge, x_norm_of)
from ..waves import CNOIDAL, DNOIDAL, make_wave, solitary_profile

L = 2 * math.pi


def wave(family, multiple=1, n=64, k=None):
    fam = CNOIDAL if family == 'cnoidal' else DNOIDAL
    k = k if k is not None else (0.5 if family == 'cnoidal' else 0.8)
    p = fam.params(EllipticModulus.of(k), L)
    return fam.profile_from(p, PeriodicGrid(multiple * L, multiple * n))


def do_test_closed_form(family, c):
    numeric = d_second_numeric(c, L, family)
    closed = d_second_closed(family, c, L)
    assert numeric > 0
    assert abs(numeric - closed) <= 1e-6 * abs(closed)


def test_systems():
    assert system_for('yukawa').psi_ratio == pytest.approx(math.sqrt(2))
    assert system_for('cubic').psi_ratio == 1.0
    assert system_for(system_for('cubic')).name == 'cubic'
    with pytest.raises(DomainError):
        system_for('quartic')


def test_apply_J_is_skew():
    rng = np.random.default_rng(0)
    x = tuple(rng.normal(size=16) for _ in range(4))
    y = tuple(rng.normal(size=16) for _ in range(4))

    def inner(a, b):
        return sum(np.dot(p, q) for p, q in zip(a, b))

    assert inner(x, apply_J(y)) == pytest.approx(-inner(apply_J(x), y), abs=1e-12)


def test_charge_of_waves():
    w = wave('dnoidal', n=128)
    K, E = complete_K(w.params.k), complete_E(w.params.k)
    assert charge_F(wave_state(w)) == pytest.approx(4 * K * E / L, rel=1e-12)
    w = wave('cnoidal', n=128)
    assert charge_F(wave_state(w)) == pytest.approx(8 * w.c * f_cnoidal(w.params.k) / L,
                                                    rel=1e-10)
    assert wave_charge('cnoidal', w.c, L) == pytest.approx(charge_F(wave_state(w)), rel=1e-10)


def test_functionals_of_zero_state():
    g = PeriodicGrid(L, 32)
    zero = state_from(g, np.zeros(32), np.zeros(32), np.zeros(32))
    for system in ('yukawa', 'cubic'):
        f = functionals(zero, system, 1.0)
        assert f.E == 0 and f.F == 0 and f.H == 0


@pytest.mark.parametrize('family,system', [('cnoidal', 'yukawa'), ('dnoidal', 'cubic')])
def test_functionals_are_phase_invariant(family, system):
    w = wave(family)
    s = wave_state(w)
    rotated = state_from(s.grid, np.exp(0.7j) * s.u.values, s.v.values, s.w.values)
    assert energy_E(rotated, system, w.c) == pytest.approx(energy_E(s, system, w.c), rel=1e-12)
    assert charge_F(rotated) == pytest.approx(charge_F(s), rel=1e-12)


@pytest.mark.parametrize('family,system', [('cnoidal', 'yukawa'), ('dnoidal', 'cubic')])
def test_waves_are_critical_points(family, system):
    w = wave(family, n=128)
    gradient = h_gradient(wave_state(w), system, w.c)
    assert max(np.max(np.abs(part)) for part in gradient) <= 1e-7


@pytest.mark.parametrize('c', [0.6, 1.0, 2.0])
def test_cnoidal_closed_form(c):
    do_test_closed_form('cnoidal', c)


@pytest.mark.parametrize('c', [0.275, 0.5, 1.0])
def test_dnoidal_closed_form(c):
    do_test_closed_form('dnoidal', c)


def test_step_halving():
    coarse = d_second_numeric(0.6, L, 'cnoidal', h=1e-3, richardson=False)
    fine = d_second_numeric(0.6, L, 'cnoidal', h=5e-4, richardson=False)
    assert abs(coarse - fine) <= 1e-5 * abs(fine)


def test_too_close_to_threshold():
    with pytest.raises(DomainError):
        d_second_numeric(CNOIDAL.threshold(L) * (1 + 1e-5), L, 'cnoidal')
    with pytest.raises(DomainError):
        d_second_closed('sinusoidal', 1.0, L)


@pytest.mark.parametrize('k', [0.1, 0.12, 0.15, 0.2])
def test_dnoidal_series_matches_elliptic_form(k):
    assert d_second_dnoidal_series(k, L) == pytest.approx(d_second_dnoidal_elliptic(k, L),
                                                          rel=1e-9)


def test_dnoidal_closed_form_small_modulus():
    assert d_second_dnoidal_of(1e-8, L) == pytest.approx(L / 3, rel=1e-14)
    ks = np.geomspace(1e-6, 0.3, 40)
    values = np.array([d_second_dnoidal_of(k, L) for k in ks])
    assert np.all(values > 0)
    # L/3 - L k^4 / 192 + O(k^6)
    assert np.all(values <= L / 3 * (1 + 1e-14))
    assert np.all(np.abs(values - L / 3) <= L * ks ** 4 / 100 + 1e-14 * L)
    below = d_second_dnoidal_of(np.nextafter(SERIES_MODULUS, 0), L)
    above = d_second_dnoidal_of(SERIES_MODULUS, L)
    assert below == pytest.approx(above, rel=1e-9)


def test_dnoidal_closed_form_near_threshold():
    c = DNOIDAL.speed(EllipticModulus.of(0.05), L)
    assert d_second_closed_dnoidal(c, L) == pytest.approx(L / 3, rel=1e-6)
    assert d_second_closed_dnoidal(c, L) < L / 3


@pytest.mark.parametrize('family', ['cnoidal', 'dnoidal'])
def test_convexity_sweep(family):
    threshold = CNOIDAL.threshold(L) if family == 'cnoidal' else DNOIDAL.threshold(L)
    rows = d_second_sweep(family, L, np.linspace(1.1, 10.0, 5) * threshold)
    assert len(rows) == 5
    for row in rows:
        assert row['numeric'] > 0
        assert row['relative_gap'] <= 1e-6


@pytest.mark.parametrize('k', [0.2, 0.5, 0.8, 0.95])
def test_mass_integral(k):
    mi = mass_integral_cnoidal(k, L)
    assert mi.identity_defect <= 1e-8
    assert mi.closed == pytest.approx(mi.quadrature, rel=1e-10)
    report = upsilon_report(k, L)
    assert report['matching'] == '(16/L) f(k)'
    assert report['closed_error'] <= 1e-10


def test_f_is_increasing():
    values = [f_cnoidal(k) for k in np.linspace(0.01, 0.99, 100)]
    assert np.all(np.diff(values) > 0)


def test_closed_cnoidal_matches_general_dispatch():
    assert d_second_closed('cnoidal', 0.8, L) == d_second_closed_cnoidal(0.8, L)


def test_modified_gram_schmidt():
    vectors = np.array([[1.0, 1.0, 2.0], [0.0, 1.0, 0.0], [0.0, 0.0, 0.0]])
    basis = modified_gram_schmidt(vectors)
    assert basis.shape == (3, 2)
    assert np.allclose(basis.T @ basis, np.eye(2), atol=1e-14)


SINGLE_PERIOD_INDEX = {'cnoidal': 0, 'dnoidal': 1}
DOUBLE_PERIOD_INDEX = {'cnoidal': 2, 'dnoidal': 3}


@pytest.mark.parametrize('family', ['cnoidal', 'dnoidal'])
def test_index_on_single_period(family):
    report = instability_index(wave(family))
    assert report.n_LR == 1
    assert report.n_LR_hat == SINGLE_PERIOD_INDEX[family]
    assert report.index == SINGLE_PERIOD_INDEX[family]
    assert report.kernel_LR == 1 and report.kernel_LI == 1


@pytest.mark.parametrize('family', ['cnoidal', 'dnoidal'])
def test_index_on_double_period(family):
    report = instability_index(wave(family, 2))
    assert report.n_LR == 3
    assert report.n_LR_hat == DOUBLE_PERIOD_INDEX[family]
    assert report.index == DOUBLE_PERIOD_INDEX[family]


@pytest.mark.parametrize('family,multiple', [('cnoidal', 1), ('cnoidal', 2),
                                             ('dnoidal', 1), ('dnoidal', 2)])
def test_charge_constraint_removes_one_direction_when_convex(family, multiple):
    w = wave(family, multiple)
    report = instability_index(w)
    fixed = d_second_fixed_mass(w)
    assert report.n_LR_hat == report.n_LR - (1 if fixed > 0 else 0)


@pytest.mark.parametrize('k', [0.3, 0.5, 0.8])
def test_fixed_mass_convexity_signs(k):
    assert d_second_fixed_mass(wave('cnoidal', k=k, n=128)) > 0
    assert d_second_fixed_mass(wave('dnoidal', k=k, n=128)) < 0


def test_fixed_mass_convexity_of_dnoidal_wave():
    w = wave('dnoidal', n=128)
    phi, dx = w.phi.values, w.grid.spacing
    L3 = assemble_named('L3', w).entries
    expected = 0.5 * d_second_dnoidal_of(w.params.k, L) - 2 * dx * phi @ np.linalg.solve(L3, phi)
    assert d_second_fixed_mass(w) == pytest.approx(expected, rel=1e-7)


def test_dnoidal_branch_tangent():
    g = PeriodicGrid(L, 128)
    c = 0.5
    h = 1e-5 * c
    w = make_wave('dnoidal', c, L, g)
    chi = (make_wave('dnoidal', c + h, L, g).phi.values
           - make_wave('dnoidal', c - h, L, g).phi.values) / (2 * h)
    LR = assemble_block('LRdn', w).entries
    phi = w.phi.values
    residual = LR @ np.concatenate([chi, chi]) + 2 * np.concatenate([phi, phi])
    assert np.max(np.abs(residual)) <= 1e-5 * np.max(phi)


def test_index_rejects_mismatched_system():
    with pytest.raises(DomainError):
        instability_index(wave('cnoidal'), system='cubic')
    with pytest.raises(DomainError):
        linearized_spectrum(solitary_profile(1.0, 'yukawa', PeriodicGrid(80.0, 256)))


def test_no_growth_on_single_period():
    spectrum = linearized_spectrum(wave('cnoidal'), full=False)
    assert not spectrum.unstable
    assert spectrum.unstable_mode is None
    assert spectrum.sigma_max <= spectrum.tolerance
    assert spectrum.n_unstable == 0


@pytest.mark.parametrize('k', [0.5, 0.8])
def test_dnoidal_grows_on_single_period(k):
    w = wave('dnoidal', k=k, n=128)
    spectrum = linearized_spectrum(w)
    assert spectrum.unstable
    assert spectrum.n_unstable == instability_index(w).index == 1
    assert spectrum.symmetry_defect() <= 1e-6
    assert spectrum.max_real_part() == pytest.approx(spectrum.sigma_max, rel=1e-4)


@pytest.mark.parametrize('family', ['cnoidal', 'dnoidal'])
def test_growth_on_double_period(family):
    w = wave(family, 2)
    spectrum = linearized_spectrum(w)
    assert spectrum.unstable
    assert spectrum.n_unstable == instability_index(w).index == DOUBLE_PERIOD_INDEX[family]
    assert spectrum.symmetry_defect() <= 1e-6
    assert spectrum.max_real_part() == pytest.approx(spectrum.sigma_max, rel=1e-4)

    mode = np.concatenate(spectrum.unstable_mode)
    G = generator_matrix(w)
    residual = np.linalg.norm(G @ mode - spectrum.sigma_max * mode)
    assert residual <= 1e-8 * np.linalg.norm(G, np.inf) * np.linalg.norm(mode)


def test_unstable_mode_normalization():
    w = wave('cnoidal', 2)
    first = linearized_spectrum(w, full=False)
    second = linearized_spectrum(w, full=False)
    for a, b in zip(first.unstable_mode, second.unstable_mode):
        assert np.array_equal(a, b)
    assert x_norm_of(first.unstable_mode, w.grid) == pytest.approx(1.0, rel=1e-12)


def test_growth_rate_converges_with_resolution():
    coarse = linearized_spectrum(wave('cnoidal', 2, n=64), full=False).sigma_max
    fine = linearized_spectrum(wave('cnoidal', 2, n=128), full=False).sigma_max
    assert coarse == pytest.approx(fine, rel=1e-5)


def test_full_spectrum_is_required_for_symmetry_checks():
    spectrum = linearized_spectrum(wave('dnoidal'), full=False)
    with pytest.raises(DomainError):
        spectrum.symmetry_defect()
    with pytest.raises(DomainError):
        spectrum.max_real_part()


def test_make_wave_matches_family_params():
    w = make_wave('cnoidal', 0.6, L, PeriodicGrid(L, 64))
    assert instability_index(w).index == 0
