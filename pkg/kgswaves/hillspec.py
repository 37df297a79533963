"""Dense Hill operators linearized about the standing waves and their spectra.

Scalar operators are -d^2/dx^2 + 2c + q(x) on a periodic grid; the block
operators act on pairs (u1, v) (real part) and (u2, w) (imaginary part).
Analytic Lame data for -d^2/dz^2 + n(n+1) k^2 sn^2(z) cover n = 3 (cnoidal
waves) and n = 2 (dnoidal waves).
"""
import logging
import math
import time
from dataclasses import dataclass, field
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np
import scipy.linalg

from .elliptic import EllipticModulus, ModulusLike, as_modulus, complete_K, jacobi
from .errors import DomainError, KernelAmbiguityError, NumericalError
from .grid import PeriodicGrid, SampledField, second_derivative_matrix, spectral_derivative
from .waves import CnoidalParams, DnoidalParams, WaveProfile, wave_derivative

logger = logging.getLogger(__name__)

ZERO_TOL_FACTOR = 1e-8
SIMPLICITY_FACTOR = 100.0
AMBIGUITY_FACTOR = 10.0
SYMMETRY_RTOL = 1e-10
NESTING_TOL = 1e-7

SCALAR_KINDS = ('L1', 'L2', 'L3')
BLOCK_KINDS = ('LR', 'LI')
FAMILY_SUFFIX = {'cnoidal': 'cn', 'dnoidal': 'dn'}

# A_R (cnoidal) and B_R (dnoidal): rows are the eigen-directions of the 2x2 coupling
SIMILARITY = {
    'cn': np.array([[1.0, 1.0 / math.sqrt(2.0)], [-1.0 / math.sqrt(2.0), 1.0]]),
    'dn': np.array([[1.0, 1.0], [-1.0, 1.0]]),
}


@dataclass(frozen=True)
class HillOperator:
    entries: np.ndarray
    domain_length: float
    kind: str = 'custom'

    def __post_init__(self):
        a = np.asarray(self.entries, dtype=float)
        if a.ndim != 2 or a.shape[0] != a.shape[1]:
            raise DomainError(f'operator must be square, got shape {a.shape}')
        scale = max(np.max(np.abs(a)), 1.0)
        asym = np.max(np.abs(a - a.T))
        if asym > SYMMETRY_RTOL * scale:
            raise DomainError(f'{self.kind} operator is not symmetric (defect {asym:.3e})')
        a.flags.writeable = False
        object.__setattr__(self, 'entries', a)

    @property
    def size(self) -> int:
        return self.entries.shape[0]

    def apply(self, x: np.ndarray) -> np.ndarray:
        return self.entries @ x


@dataclass(frozen=True)
class SpectrumReport:
    eigenvalues: np.ndarray
    zero_tol: float
    residual: float
    eigenvectors: Optional[np.ndarray] = None

    @property
    def n_negative(self) -> int:
        return int(np.sum(self.eigenvalues < -self.zero_tol))

    @property
    def kernel_dim(self) -> int:
        return int(np.sum(np.abs(self.eigenvalues) <= self.zero_tol))

    @property
    def simplicity_gap(self) -> float:
        return SIMPLICITY_FACTOR * self.zero_tol

    def is_simple(self, i: int) -> bool:
        lam = self.eigenvalues
        gaps = [abs(lam[j] - lam[i]) for j in (i - 1, i + 1) if 0 <= j < len(lam)]
        return all(gap > self.simplicity_gap for gap in gaps)

    def kernel_indices(self) -> np.ndarray:
        return np.flatnonzero(np.abs(self.eigenvalues) <= self.zero_tol)

    def vectors(self, indices) -> np.ndarray:
        if self.eigenvectors is None:
            raise DomainError('spectrum was computed without eigenvectors')
        return self.eigenvectors[:, indices]

    def check_unambiguous(self):
        """Raises if an eigenvalue sits between zero_tol and 10 * zero_tol."""
        a = np.abs(self.eigenvalues)
        suspicious = (a > self.zero_tol) & (a <= AMBIGUITY_FACTOR * self.zero_tol)
        if np.any(suspicious):
            raise KernelAmbiguityError(float(self.eigenvalues[suspicious][0]), self.zero_tol)


def _potential_matrix(g: PeriodicGrid, c: float, potential: np.ndarray) -> np.ndarray:
    return -second_derivative_matrix(g) + np.diag(2.0 * c + potential)


def assemble_scalar(potential: SampledField, c: float, g: PeriodicGrid,
                    kind: str = 'custom') -> HillOperator:
    """-d^2/dx^2 + 2c + potential(x) as a dense collocation matrix."""
    if potential.grid != g:
        raise DomainError('potential is not sampled on the operator grid')
    if not potential.is_real:
        raise DomainError('potential must be real')
    return HillOperator(_potential_matrix(g, c, potential.values), g.length, kind)


def _suffix(w: WaveProfile) -> str:
    try:
        return FAMILY_SUFFIX[w.family]
    except KeyError:
        raise DomainError(f'no linearized operators for {w.family} profiles') from None


def _check_grid(w: WaveProfile, g: Optional[PeriodicGrid]) -> PeriodicGrid:
    if g is not None and g != w.grid:
        raise DomainError('wave is not sampled on the requested grid')
    return w.grid


def scalar_potentials(w: WaveProfile) -> Dict[str, np.ndarray]:
    """Multiplication parts of L1, L2, L3 for the wave's family."""
    phi = w.phi.values
    if _suffix(w) == 'cn':
        return {'L1': -4.0 * phi, 'L2': -2.0 * phi, 'L3': 2.0 * phi}
    sq = phi ** 2
    return {'L1': -6.0 * sq, 'L2': -2.0 * sq, 'L3': 2.0 * sq}


def assemble_named(kind: str, w: WaveProfile, g: Optional[PeriodicGrid] = None) -> HillOperator:
    """Scalar L1/L2/L3 or block LR/LI operator linearized about w.

    kind may carry the family suffix ('L1cn', 'LRdn') or omit it ('L1').
    """
    suffix = _suffix(w)
    base = kind[:-2] if kind.endswith(('cn', 'dn')) else kind
    if kind != base and kind[-2:] != suffix:
        raise DomainError(f'operator {kind} does not match a {w.family} wave')
    if base in SCALAR_KINDS:
        g = _check_grid(w, g)
        q = SampledField(g, scalar_potentials(w)[base])
        return assemble_scalar(q, w.c, g, base + suffix)
    if base in BLOCK_KINDS:
        return assemble_block(base + suffix, w, g)
    raise DomainError(f'unknown operator kind {kind!r}')


def assemble_block(kind: str, w: WaveProfile, g: Optional[PeriodicGrid] = None) -> HillOperator:
    """2N x 2N block operator LR or LI for (u1, v) or (u2, w)."""
    suffix = _suffix(w)
    if kind not in ('LR' + suffix, 'LI' + suffix):
        raise DomainError(f'operator {kind} does not match a {w.family} wave')
    g = _check_grid(w, g)
    phi, c, n = w.phi.values, w.c, g.n
    shifted = -second_derivative_matrix(g) + 2.0 * c * np.eye(n)
    if suffix == 'cn':
        upper = shifted - np.diag(2.0 * phi)
        lower = shifted
        coupling = np.diag(-2.0 * math.sqrt(2.0) * phi)
    else:
        upper = shifted - np.diag(2.0 * phi ** 2)
        lower = upper
        coupling = np.diag(-4.0 * phi ** 2)
    if kind.startswith('LI'):
        entries = scipy.linalg.block_diag(upper, np.eye(n))
    else:
        entries = np.block([[upper, coupling], [coupling, lower]])
    logger.debug('assembled %s of size %d on length %r', kind, 2 * n, g.length)
    return HillOperator(entries, g.length, kind)


def eig_sym(op: HillOperator, zero_tol: Optional[float] = None,
            want_vectors: bool = False) -> SpectrumReport:
    """Full symmetric eigendecomposition, eigenvalues ascending.

    zero_tol defaults to ZERO_TOL_FACTOR * max|lambda| = 1e-8 max|lambda|; at
    n = 256 a 1e-6 factor would swallow the small Lame band-edge eigenvalues.
    """
    start = time.perf_counter()
    try:
        lam, vecs = scipy.linalg.eigh(op.entries)
    except (scipy.linalg.LinAlgError, ValueError) as e:
        raise NumericalError(f'eigh failed for {op.kind} of size {op.size}: {e}') from e
    scale = float(np.max(np.abs(lam))) if lam.size else 1.0
    if zero_tol is None:
        zero_tol = ZERO_TOL_FACTOR * scale
    residual = float(np.max(np.linalg.norm(op.entries @ vecs - vecs * lam, axis=0)))
    if residual > 1e-8 * max(scale, 1.0):
        raise NumericalError(
            f'eigenpairs of {op.kind} have residual {residual:.3e} (norm {scale:.3e})')
    logger.debug('eigh of %s (size %d) in %.3fs', op.kind, op.size, time.perf_counter() - start)
    return SpectrumReport(lam, zero_tol, residual, vecs if want_vectors else None)


def grid_function(vec: np.ndarray, g: PeriodicGrid) -> np.ndarray:
    """Turns a unit eigenvector into a grid function of unit L2 norm."""
    return vec / math.sqrt(g.spacing)


def alignment(a: np.ndarray, b: np.ndarray) -> float:
    """|cos| of the angle between two grid functions."""
    return float(abs(np.dot(a, b)) / (np.linalg.norm(a) * np.linalg.norm(b)))


# --- Lame equation -------------------------------------------------------

@dataclass(frozen=True)
class LameEigenData:
    """Band-edge eigenvalues of -Psi'' + n(n+1) k^2 sn^2 Psi = delta Psi.

    Periodic data has period 2K, semiperiodic data Psi(z + 2K) = -Psi(z).
    """
    problem: str
    degree: int
    k: EllipticModulus
    deltas: Tuple[float, ...]
    eigenfunctions: Tuple[Callable[[np.ndarray], np.ndarray], ...] = field(repr=False)

    @property
    def period(self) -> float:
        K = complete_K(self.k)
        return 2 * K if self.problem == 'periodic' else 4 * K


def _lame_cubic(m: EllipticModulus, problem: str):
    k2 = m.k_sq
    if problem == 'periodic':
        root = math.sqrt(m.kprime_sq + 4 * k2 ** 2)
        deltas = (2 + 5 * k2 - 2 * root, 4 + 4 * k2, 2 + 5 * k2 + 2 * root)

        def psi0(z):
            sn, _, dn = jacobi(z, m)
            return dn * (1 - (1 + 2 * k2 - root) * sn ** 2)

        def psi1(z):
            sn, cn, dn = jacobi(z, m)
            return sn * cn * dn

        def psi2(z):
            sn, _, dn = jacobi(z, m)
            return dn * (1 - (1 + 2 * k2 + root) * sn ** 2)

        return deltas, (psi0, psi1, psi2)

    r0 = math.sqrt(4 - k2 + k2 ** 2)
    r1 = math.sqrt(4 - 7 * k2 + 4 * k2 ** 2)
    deltas = (5 + 2 * k2 - 2 * r0, 5 + 5 * k2 - 2 * r1)

    def semi0(z):
        sn, cn, _ = jacobi(z, m)
        return cn * (1 - (2 + k2 - r0) * sn ** 2)

    def semi1(z):
        sn, _, _ = jacobi(z, m)
        return sn * (3 - (2 + 2 * k2 - r1) * sn ** 2)

    return deltas, (semi0, semi1)


def _lame_quadratic(m: EllipticModulus, problem: str):
    k2 = m.k_sq
    if problem == 'periodic':
        root = math.sqrt(m.kprime_sq + k2 ** 2)
        deltas = (2 + 2 * k2 - 2 * root, 4 + k2, 2 + 2 * k2 + 2 * root)
        # the smaller delta pairs with the larger offset
        a0 = (1 + k2 + root) / (3 * k2)
        a2 = (1 + k2 - root) / (3 * k2)

        def psi0(z):
            return jacobi(z, m).sn ** 2 - a0

        def psi1(z):
            sn, cn, _ = jacobi(z, m)
            return sn * cn

        def psi2(z):
            return jacobi(z, m).sn ** 2 - a2

        return deltas, (psi0, psi1, psi2)

    def semi0(z):
        _, cn, dn = jacobi(z, m)
        return cn * dn

    def semi1(z):
        sn, _, dn = jacobi(z, m)
        return sn * dn

    return (1 + k2, 1 + 4 * k2), (semi0, semi1)


def lame_analytic(k: ModulusLike, problem: str = 'periodic', degree: int = 3) -> LameEigenData:
    m = as_modulus(k)
    if problem not in ('periodic', 'semiperiodic'):
        raise DomainError(f'unknown Lame problem {problem!r}')
    if degree == 3:
        deltas, funcs = _lame_cubic(m, problem)
    elif degree == 2:
        deltas, funcs = _lame_quadratic(m, problem)
    else:
        raise DomainError(f'Lame degree must be 2 or 3, got {degree!r}')
    return LameEigenData(problem, degree, m, tuple(deltas), tuple(funcs))


def periodic_delta_misread(k: ModulusLike) -> Tuple[float, float]:
    """delta_0, delta_2 with the radicand 1 - k^2 + 4k^2 in place of 1 - k^2 + 4k^4."""
    k2 = as_modulus(k).k_sq
    root = math.sqrt(1 + 3 * k2)
    return 2 + 5 * k2 - 2 * root, 2 + 5 * k2 + 2 * root


def delta_to_lambda(delta: float, p: CnoidalParams) -> float:
    """Maps a Lame eigenvalue to the matching eigenvalue of L1 (cnoidal)."""
    return delta * (p.beta3 - p.beta1) / 12 - (p.beta3 - p.omega)


def delta_to_lambda_dnoidal(delta: float, p: DnoidalParams) -> float:
    """Maps a Lame eigenvalue to the matching eigenvalue of L1 (dnoidal)."""
    return p.eta ** 2 * (delta - 6) + 2 * p.c


def lame_operator(k: ModulusLike, degree: int, problem: str, n: int) -> HillOperator:
    m = as_modulus(k)
    K = complete_K(m)
    g = PeriodicGrid(2 * K if problem == 'periodic' else 4 * K, n)
    q = degree * (degree + 1) * m.k_sq * jacobi(g.points, m).sn ** 2
    return assemble_scalar(SampledField(g, q), 0.0, g, f'lame{degree}-{problem}')


def lame_plug_in_residual(data: LameEigenData, n: int = 256) -> List[float]:
    """Relative sup residual of -Psi'' + n(n+1) k^2 sn^2 Psi - delta Psi per eigenpair."""
    g = PeriodicGrid(data.period, n)
    sn = jacobi(g.points, data.k).sn
    coef = data.degree * (data.degree + 1) * data.k.k_sq
    out = []
    for delta, psi in zip(data.deltas, data.eigenfunctions):
        f = SampledField(g, psi(g.points))
        r = -spectral_derivative(f, 2).values + (coef * sn ** 2 - delta) * f.values
        out.append(float(np.max(np.abs(r)) / np.max(np.abs(f.values))))
    return out


def semiperiodic_eigenvalues(single: Sequence[float], doubled: Sequence[float],
                             tol: float = NESTING_TOL) -> np.ndarray:
    """Doubled-domain eigenvalues with no partner in the single-domain spectrum.

    Only the lower half of the single spectrum is trusted, so doubled
    eigenvalues above it are not considered.
    """
    single = np.sort(np.asarray(single))
    trusted = single[: len(single) // 2]
    cutoff = trusted[-1]
    used = np.zeros(len(trusted), dtype=bool)
    leftover = []
    for lam in np.sort(np.asarray(doubled)):
        if lam > cutoff:
            break
        dist = np.where(used, np.inf, np.abs(trusted - lam))
        j = int(np.argmin(dist))
        if dist[j] <= tol * max(1.0, abs(lam)):
            used[j] = True
        else:
            leftover.append(lam)
    return np.array(leftover)


def nesting_defect(single: Sequence[float], doubled: Sequence[float]) -> float:
    """Largest distance from a trusted single-domain eigenvalue to the doubled spectrum."""
    single = np.sort(np.asarray(single))
    doubled = np.sort(np.asarray(doubled))
    trusted = single[: len(single) // 2]
    return float(max(np.min(np.abs(doubled - lam)) for lam in trusted))


def lame_reproduction(k: ModulusLike, degree: int = 3, n: int = 256) -> Dict[str, object]:
    """Compares the analytic Lame band edges with the discretized operator."""
    m = as_modulus(k)
    periodic = lame_analytic(m, 'periodic', degree)
    semi = lame_analytic(m, 'semiperiodic', degree)
    single = eig_sym(lame_operator(m, degree, 'periodic', n)).eigenvalues
    doubled = eig_sym(lame_operator(m, degree, 'semiperiodic', 2 * n)).eigenvalues
    semi_numeric = semiperiodic_eigenvalues(single, doubled)

    report = {
        'k': m.k,
        'degree': degree,
        'periodic_analytic': list(periodic.deltas),
        'periodic_numeric': single[:3].tolist(),
        'periodic_error': float(np.max(np.abs(single[:3] - periodic.deltas))),
        'semiperiodic_analytic': list(semi.deltas),
        'semiperiodic_numeric': semi_numeric[:2].tolist(),
        'semiperiodic_error': float(np.max(np.abs(semi_numeric[:2] - semi.deltas))),
        'plug_in_residuals': lame_plug_in_residual(periodic, n) + lame_plug_in_residual(semi, n),
    }
    if degree == 3:
        misread = periodic_delta_misread(m)
        report['misread_error'] = float(max(abs(single[0] - misread[0]),
                                            abs(single[2] - misread[1])))
        report['radicand'] = ('1-k^2+4k^4' if report['periodic_error'] < report['misread_error']
                              else '1-k^2+4k^2')
    return report


# --- claims about the linearized operators --------------------------------

@dataclass(frozen=True)
class ClaimVerdict:
    claim: str
    passed: bool
    detail: str = ''


@dataclass
class CountReport:
    family: str
    domain_multiple: int
    verdicts: List[ClaimVerdict] = field(default_factory=list)
    spectra: Dict[str, SpectrumReport] = field(default_factory=dict)

    @property
    def passed(self) -> bool:
        return all(v.passed for v in self.verdicts)

    def failures(self) -> List[ClaimVerdict]:
        return [v for v in self.verdicts if not v.passed]

    def add(self, claim: str, passed: bool, detail: str = ''):
        self.verdicts.append(ClaimVerdict(claim, bool(passed), detail))
        if not passed:
            logger.warning('claim failed: %s (%s)', claim, detail)


def domain_multiple(w: WaveProfile) -> int:
    ratio = w.grid.length / w.params.L
    multiple = int(round(ratio))
    if multiple not in (1, 2) or abs(ratio - multiple) > 1e-12 * ratio:
        raise DomainError(f'wave grid must cover [0, L] or [0, 2L], got length {w.grid.length!r}')
    return multiple


def _lowest(spec: SpectrumReport, count: int) -> str:
    return ', '.join(f'{x:.6g}' for x in spec.eigenvalues[:count])


def verify_counts(w: WaveProfile, kinds: Sequence[str] = SCALAR_KINDS + BLOCK_KINDS,
                  zero_tol: Optional[float] = None) -> CountReport:
    """Checks the eigenvalue counts of the linearized operators about w."""
    suffix = _suffix(w)
    mult = domain_multiple(w)
    domain = '[0,L]' if mult == 1 else '[0,2L]'
    report = CountReport(w.family, mult)
    phi = w.phi.values
    dphi = wave_derivative(w).values

    for base in kinds:
        name = f'{base}{suffix}'
        spec = eig_sym(assemble_named(base, w), zero_tol, want_vectors=True)
        report.spectra[name] = spec
        lam = spec.eigenvalues
        tag = f'{name} on {domain}'
        if base == 'L1' and mult == 1:
            report.add(f'{tag}: exactly one negative eigenvalue, simple',
                       spec.n_negative == 1 and spec.is_simple(0), _lowest(spec, 3))
            report.add(f'{tag}: zero is a simple eigenvalue with eigenfunction phi\'',
                       spec.kernel_dim == 1 and spec.is_simple(1)
                       and alignment(spec.vectors(1), dphi) > 1 - 1e-6, _lowest(spec, 3))
        elif base == 'L1':
            report.add(f'{tag}: first four eigenvalues simple',
                       all(spec.is_simple(i) for i in range(4)), _lowest(spec, 5))
            report.add(f'{tag}: exactly three negative eigenvalues',
                       spec.n_negative == 3, _lowest(spec, 5))
            report.add(f'{tag}: fourth eigenvalue is zero with eigenfunction phi\'',
                       abs(lam[3]) <= spec.zero_tol and alignment(spec.vectors(3), dphi) > 1 - 1e-6,
                       _lowest(spec, 5))
        elif base == 'L2':
            report.add(f'{tag}: lowest eigenvalue zero, simple, eigenfunction phi',
                       abs(lam[0]) <= spec.zero_tol and spec.is_simple(0)
                       and alignment(spec.vectors(0), phi) > 1 - 1e-6, _lowest(spec, 3))
        elif base == 'L3':
            report.add(f'{tag}: spectrum bounded below by 2c',
                       lam[0] >= 2 * w.c - spec.zero_tol, f'min {lam[0]:.6g}, 2c {2 * w.c:.6g}')
        elif base == 'LR':
            expected = 1 if mult == 1 else 3
            report.add(f'{tag}: {expected} negative eigenvalue(s) and a simple kernel',
                       spec.n_negative == expected and spec.kernel_dim == 1,
                       f'negative {spec.n_negative}, kernel {spec.kernel_dim}')
        elif base == 'LI':
            report.add(f'{tag}: lowest eigenvalue zero and simple',
                       abs(lam[0]) <= spec.zero_tol and spec.is_simple(0), _lowest(spec, 3))
        else:
            raise DomainError(f'unknown operator kind {base!r}')
    return report


def orthogonality_check(report: SpectrumReport, w: WaveProfile) -> float:
    """max |<chi_i, phi>| over the second and third eigenfunctions (unit L2 norm)."""
    vecs = report.vectors([1, 2])
    g = w.grid
    return float(max(abs(np.sum(grid_function(v, g) * w.phi.values) * g.spacing)
                     for v in vecs.T))


def ground_state_overlap(report: SpectrumReport, w: WaveProfile) -> float:
    """<chi_0, phi> with chi_0 oriented to have positive mean."""
    g = w.grid
    chi = grid_function(report.vectors(0), g)
    if np.sum(chi) < 0:
        chi = -chi
    return float(np.sum(chi * w.phi.values) * g.spacing)


def similarity_check(w: WaveProfile) -> float:
    """Relative defect of T LR T^-1 against diag(L1, L3)."""
    suffix = _suffix(w)
    n = w.grid.n
    T = np.kron(SIMILARITY[suffix], np.eye(n))
    LR = assemble_block('LR' + suffix, w).entries
    transformed = T @ LR @ np.linalg.inv(T)
    target = scipy.linalg.block_diag(assemble_named('L1', w).entries,
                                     assemble_named('L3', w).entries)
    return float(np.max(np.abs(transformed - target)) / np.max(np.abs(LR)))
