"""Time integration of the Klein-Gordon-Schrodinger systems.

One step is the symmetric composition N(dt/2) L(dt) N(dt/2):
  N: exact local flow u <- exp(i V tau) u, w <- w + tau s  (|u| and v frozen)
  L: exact linear flow, u_hat <- exp(-i xi^2 dt / 2) u_hat and a rotation of
     (v_hat, w_hat) at frequency Omega = sqrt(xi^2 + 2c).
Both substeps keep |u| in L2, so the charge is conserved to roundoff.
"""
import logging
import math
from dataclasses import dataclass, field, replace
from typing import Dict, List, NamedTuple, Optional, Sequence, Tuple, Union

import numpy as np
import scipy.fft
import scipy.optimize

from .errors import BlowUpError, DomainError
from .grid import (PeriodicGrid, SampledField, dft_forward, sobolev_norm, translate,
                   translation_factors)
from .stability import charge_F, energy_E, system_for, system_of, x_norm_of
from .waves import WaveProfile

logger = logging.getLogger(__name__)

SMOOTH_MODES = 8
TRANSLATION_XTOL = 1e-10


@dataclass(frozen=True)
class FieldState:
    u: SampledField
    v: SampledField
    w: SampledField
    t: float = 0.0

    def __post_init__(self):
        if not (self.u.grid == self.v.grid == self.w.grid):
            raise DomainError('u, v and w must share one grid')
        object.__setattr__(self, 'u', self.u.with_values(self.u.values.astype(complex)))

    @property
    def grid(self) -> PeriodicGrid:
        return self.u.grid

    def components(self) -> Tuple[np.ndarray, ...]:
        """(u1, v, u2, w)."""
        u = self.u.values
        return u.real.copy(), self.v.values.copy(), u.imag.copy(), self.w.values.copy()

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.u.values)) and np.all(np.isfinite(self.v.values))
                    and np.all(np.isfinite(self.w.values)))


def state_from(g: PeriodicGrid, u, v, w, t: float = 0.0) -> FieldState:
    return FieldState(SampledField(g, np.asarray(u, dtype=complex)),
                      SampledField(g, np.asarray(v, dtype=float)),
                      SampledField(g, np.asarray(w, dtype=float)), t)


def wave_state(w: WaveProfile, t: float = 0.0) -> FieldState:
    """(psi_c, phi_c, 0) on the wave's grid."""
    g = w.grid
    return state_from(g, w.psi, w.phi.values, np.zeros(g.n), t)


def x_norm(state: FieldState) -> float:
    """(|u|_{H1}^2 + |v|_{H1}^2 + |w|_{L2}^2)^(1/2)."""
    return math.sqrt(sobolev_norm(state.u) ** 2 + sobolev_norm(state.v) ** 2
                     + sobolev_norm(state.w, 0) ** 2)


class Stepper:
    """Precomputed propagators for one grid, time step, system and speed.

    dt may be negative, which runs the same scheme backwards.
    """

    def __init__(self, grid: PeriodicGrid, dt: float, system, c: float):
        if dt == 0 or not math.isfinite(dt):
            raise DomainError(f'time step must be finite and nonzero, got {dt!r}')
        if not c > 0:
            raise DomainError(f'wave speed must be positive, got {c!r}')
        self.grid = grid
        self.dt = dt
        self.system = system_for(system)
        self.c = c
        xi2 = grid.wavenumbers ** 2
        self._schrodinger = np.exp(-0.5j * dt * xi2)
        self._omega = np.sqrt(xi2 + 2 * c)
        self._cos = np.cos(self._omega * dt)
        self._sin = np.sin(self._omega * dt)

    def local(self, state: FieldState, tau: float) -> FieldState:
        """Exact flow of the coupling terms over time tau."""
        u, v, w = state.u.values, state.v.values, state.w.values
        u = np.exp(1j * tau * self.system.potential(v)) * u
        w = w + tau * self.system.source(np.abs(u) ** 2, v)
        return state_from(self.grid, u, v, w, state.t)

    def linear(self, state: FieldState, dt: Optional[float] = None) -> FieldState:
        """Exact flow of the linear Schrodinger and Klein-Gordon parts."""
        if dt is None or dt == self.dt:
            schrodinger, cos, sin = self._schrodinger, self._cos, self._sin
        else:
            xi2 = self.grid.wavenumbers ** 2
            schrodinger = np.exp(-0.5j * dt * xi2)
            cos, sin = np.cos(self._omega * dt), np.sin(self._omega * dt)
        u_hat = scipy.fft.fft(state.u.values) * schrodinger
        v_hat = scipy.fft.fft(state.v.values)
        w_hat = scipy.fft.fft(state.w.values)
        v_next = cos * v_hat + sin / self._omega * w_hat
        w_next = -self._omega * sin * v_hat + cos * w_hat
        return state_from(self.grid, scipy.fft.ifft(u_hat), scipy.fft.ifft(v_next).real,
                          scipy.fft.ifft(w_next).real, state.t)

    def step(self, state: FieldState) -> FieldState:
        half = 0.5 * self.dt
        out = self.local(self.linear(self.local(state, half)), half)
        out = replace(out, t=state.t + self.dt)
        if not out.is_finite():
            raise BlowUpError(out.t)
        return out

    def advance(self, state: FieldState, n_steps: int) -> FieldState:
        for _ in range(n_steps):
            state = self.step(state)
        return state


def step(state: FieldState, dt: float, system, c: float) -> FieldState:
    if not dt > 0:
        raise DomainError(f'time step must be positive, got {dt!r}')
    if not state.is_finite():
        raise DomainError('initial state has non-finite values')
    return Stepper(state.grid, dt, system, c).step(state)


# --- orbital distance -----------------------------------------------------

class OrbitFit(NamedTuple):
    distance: float
    phase: float
    shift: float


def _difference_norm(state: FieldState, psi: SampledField, phi: SampledField,
                     s: float, y: float) -> float:
    du = state.u.with_values(state.u.values - np.exp(1j * s) * translate(psi, y).values)
    dv = state.v.with_values(state.v.values - translate(phi, y).values)
    return math.sqrt(sobolev_norm(du) ** 2 + sobolev_norm(dv) ** 2
                     + sobolev_norm(state.w, 0) ** 2)


def orbital_fit(state: FieldState, w: WaveProfile,
                mode: str = 'phase_translation') -> OrbitFit:
    """Closest point (e^{is} T_y psi, T_y phi, 0) of the wave orbit in X."""
    g = state.grid
    if g != w.grid:
        raise DomainError('state and wave live on different grids')
    if mode not in ('phase_translation', 'phase_only'):
        raise DomainError(f'unknown distance mode {mode!r}')
    psi = SampledField(g, w.psi.astype(complex))
    weight = g.length * (1.0 + g.wavenumbers ** 2)
    u_hat, v_hat = dft_forward(state.u), dft_forward(state.v)
    psi_hat, phi_hat = dft_forward(psi), dft_forward(w.phi)
    a = weight * u_hat * np.conj(psi_hat)
    b = weight * v_hat * np.conj(phi_hat)

    def overlaps(y: float) -> Tuple[complex, float]:
        conj_factors = np.conj(translation_factors(g, y))
        return complex(np.sum(a * conj_factors)), float(np.sum(b * conj_factors).real)

    base = (sobolev_norm(state.u) ** 2 + sobolev_norm(psi) ** 2 + sobolev_norm(state.v) ** 2
            + sobolev_norm(w.phi) ** 2 + sobolev_norm(state.w, 0) ** 2)

    def objective(y: float) -> float:
        cu, cv = overlaps(y)
        return base - 2 * abs(cu) - 2 * cv

    xi = g.wavenumbers

    def slope(y: float) -> float:
        """d/dy of |<u, T_y psi>| + <v, T_y phi>, free of the cancellation in objective."""
        conj_factors = np.conj(translation_factors(g, y))
        d_factors = -1j * xi * conj_factors
        d_factors[g.nyquist] = -xi[g.nyquist] * np.sin(xi[g.nyquist] * y)
        cu = np.sum(a * conj_factors)
        d_cu = np.sum(a * d_factors)
        d_cv = np.sum(b * d_factors).real
        return float((np.conj(cu) * d_cu).real / max(abs(cu), 1e-300) + d_cv)

    y_best = 0.0
    if mode == 'phase_translation':
        # overlaps at every grid shift y_j = j h in one transform
        scan = base - 2 * np.abs(scipy.fft.fft(a)) - 2 * scipy.fft.fft(b).real
        j = int(np.argmin(scan))
        h = g.spacing
        lo, hi = j * h - h, j * h + h
        res = scipy.optimize.minimize_scalar(
            objective, bounds=(lo, hi), method='bounded',
            options={'xatol': TRANSLATION_XTOL * g.length})
        y_best = float(res.x) if res.fun <= scan[j] else j * h
        # polish on the zero of the slope when it is bracketed
        if slope(lo) > 0 > slope(hi):
            y_best = scipy.optimize.brentq(slope, lo, hi, xtol=1e-15 * g.length)
        y_best = math.remainder(y_best, g.length)
    s_best = float(np.angle(overlaps(y_best)[0]))
    return OrbitFit(_difference_norm(state, psi, w.phi, s_best, y_best), s_best, y_best)


def orbital_distance(state: FieldState, w: WaveProfile,
                     mode: str = 'phase_translation') -> float:
    return orbital_fit(state, w, mode).distance


# --- runs -----------------------------------------------------------------

@dataclass
class RunDiagnostics:
    times: List[float] = field(default_factory=list)
    E_series: List[float] = field(default_factory=list)
    F_series: List[float] = field(default_factory=list)
    dist_series: List[float] = field(default_factory=list)
    params: Dict[str, object] = field(default_factory=dict)

    def record(self, t: float, E: float, F: float, dist: float):
        self.times.append(t)
        self.E_series.append(E)
        self.F_series.append(F)
        self.dist_series.append(dist)

    def drift(self, series: str) -> float:
        """max |X(t) - X(0)| / |X(0)|."""
        x = np.asarray(getattr(self, f'{series}_series'))
        return float(np.max(np.abs(x - x[0])) / abs(x[0]))


def run(initial: FieldState, T: float, dt: float, system, c: float,
        observe_every: int = 1, wave: Optional[WaveProfile] = None,
        distance_mode: str = 'phase_translation') -> RunDiagnostics:
    """Integrates to time T and records E, F and the orbital distance.

    The step is adjusted to T / round(T / dt); the distance is NaN when no
    wave is given.
    """
    if not T > 0 or not dt > 0 or dt > T:
        raise DomainError(f'need T > 0 and 0 < dt <= T, got T={T!r}, dt={dt!r}')
    if observe_every < 1:
        raise DomainError(f'observe_every must be >= 1, got {observe_every!r}')
    if not initial.is_finite():
        raise DomainError('initial state has non-finite values')
    n_steps = max(1, int(round(T / dt)))
    stepper = Stepper(initial.grid, T / n_steps, system, c)
    diag = RunDiagnostics(params={
        'T': T, 'dt': stepper.dt, 'n_steps': n_steps, 'system': stepper.system.name, 'c': c,
        'observe_every': observe_every, 'n': initial.grid.n, 'length': initial.grid.length,
        'distance_mode': distance_mode,
    })

    def observe(s: FieldState):
        dist = orbital_distance(s, wave, distance_mode) if wave is not None else math.nan
        diag.record(s.t, energy_E(s, stepper.system, c), charge_F(s), dist)

    logger.info('integrating %s system to T=%r with %d steps', stepper.system.name, T, n_steps)
    state = initial
    observe(state)
    try:
        for i in range(1, n_steps + 1):
            state = stepper.step(state)
            if i % observe_every == 0 or i == n_steps:
                observe(state)
    except BlowUpError as e:
        logger.error('blow-up at t=%r after %d recorded samples', e.time, len(diag.times))
        raise BlowUpError(e.time, diag) from None
    return diag


def tracking_error(w: WaveProfile, T: float, dt: float, system=None) -> float:
    """Sup distance after time T to the exactly rotated wave (e^{icT} psi, phi)."""
    sys_ = system_of(w) if system is None else system_for(system)
    n_steps = max(1, int(round(T / dt)))
    final = Stepper(w.grid, T / n_steps, sys_, w.c).advance(wave_state(w), n_steps)
    u_exact = np.exp(1j * w.c * T) * w.psi
    return float(max(np.max(np.abs(final.u.values - u_exact)),
                     np.max(np.abs(final.v.values - w.phi.values)),
                     np.max(np.abs(final.w.values))))


# --- perturbations and growth ---------------------------------------------

Direction = Union[str, Sequence[np.ndarray]]


def random_smooth_direction(g: PeriodicGrid, seed: int) -> Tuple[np.ndarray, ...]:
    """Four real fields from the lowest Fourier modes with seeded coefficients."""
    rng = np.random.default_rng(seed)
    x = g.points
    out = []
    for _ in range(4):
        coef = rng.standard_normal((SMOOTH_MODES, 2))
        field_ = np.zeros(g.n)
        for m in range(SMOOTH_MODES):
            arg = 2 * np.pi * m * x / g.length
            field_ += coef[m, 0] * np.cos(arg) + coef[m, 1] * np.sin(arg)
        out.append(field_)
    return tuple(out)


def make_perturbed(w: WaveProfile, direction: Direction = 'random_smooth',
                   epsilon: float = 1e-3, seed: int = 0) -> FieldState:
    """The wave state plus epsilon times a unit X-norm direction (u1, v, u2, w)."""
    if not epsilon >= 0:
        raise DomainError(f'epsilon must be non-negative, got {epsilon!r}')
    g = w.grid
    if isinstance(direction, str):
        if direction != 'random_smooth':
            raise DomainError(f'unknown perturbation {direction!r}')
        parts = random_smooth_direction(g, seed)
    else:
        parts = tuple(np.asarray(p, dtype=float) for p in direction)
        if len(parts) != 4 or any(p.shape != (g.n,) for p in parts):
            raise DomainError('a perturbation direction is four fields on the wave grid')
    norm = x_norm_of(parts, g)
    if norm == 0:
        raise DomainError('perturbation direction is zero')
    d_u1, d_v, d_u2, d_w = (p * (epsilon / norm) for p in parts)
    return state_from(g, w.psi + d_u1 + 1j * d_u2, w.phi.values + d_v, d_w)


@dataclass(frozen=True)
class GrowthFit:
    sigma_fit: float
    window: Optional[Tuple[float, float]]
    residual: float

    @property
    def grew(self) -> bool:
        return self.window is not None


def fit_growth(diag: RunDiagnostics, epsilon: float, wave_norm: float) -> GrowthFit:
    """Slope of log(distance) between its first crossings of 10 eps and wave_norm / 10."""
    t = np.asarray(diag.times)
    d = np.asarray(diag.dist_series)
    above = np.flatnonzero(d >= 10 * epsilon)
    if above.size == 0:
        return GrowthFit(0.0, None, 0.0)
    lo = int(above[0])
    top = np.flatnonzero(d[lo:] >= 0.1 * wave_norm)
    hi = lo + int(top[0]) if top.size else len(d) - 1
    if hi - lo < 2:
        return GrowthFit(0.0, None, 0.0)
    tt, logd = t[lo:hi + 1], np.log(d[lo:hi + 1])
    slope, intercept = np.polyfit(tt, logd, 1)
    misfit = float(np.sqrt(np.mean((slope * tt + intercept - logd) ** 2)))
    logger.info('growth fit on [%.4g, %.4g]: sigma=%.6g', t[lo], t[hi], slope)
    return GrowthFit(float(slope), (float(t[lo]), float(t[hi])), misfit)
