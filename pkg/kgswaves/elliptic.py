"""Complete elliptic integrals and Jacobi elliptic functions.

Everything is computed from the arithmetic-geometric mean (AGM) of 1 and the
complementary modulus k'. The Jacobi functions use the descending Landen
(AGM) recursion after reducing the argument modulo 4K; moduli within
DEGENERATE_TOL of 0 or 1 switch to the trigonometric / hyperbolic series.
"""
import logging
import math
from dataclasses import dataclass
from typing import List, NamedTuple, Tuple, Union

import numpy as np

from .errors import DomainError

logger = logging.getLogger(__name__)

AGM_TOL = 1e-16
AGM_MAX_ITER = 64
DEGENERATE_TOL = 1e-8
SMALL_K_DERIVATIVE = 1e-4

_EPS = np.finfo(float).eps


@dataclass(frozen=True)
class EllipticModulus:
    """The modulus k together with k'^2 = 1 - k^2.

    k'^2 is stored separately so that moduli close to 1 keep their full
    precision; build those with from_complement.
    """
    k: float
    kprime_sq: float

    def __post_init__(self):
        if not (math.isfinite(self.k) and math.isfinite(self.kprime_sq)):
            raise DomainError(f'non-finite modulus {self.k!r}')
        # k'^2 rounds to exactly 1 for k below ~1e-8 and k rounds to 1 for tiny k'^2
        if not (0.0 < self.k <= 1.0) or not (0.0 < self.kprime_sq <= 1.0):
            raise DomainError(
                f'elliptic modulus must lie in (0, 1), got k={self.k!r}, '
                f"k'^2={self.kprime_sq!r}")
        if abs((1.0 - self.k) * (1.0 + self.k) - self.kprime_sq) > 4 * _EPS:
            raise DomainError(
                f"inconsistent modulus: k={self.k!r}, k'^2={self.kprime_sq!r}")

    @classmethod
    def of(cls, k: float) -> 'EllipticModulus':
        k = float(k)
        if not (0.0 < k < 1.0):
            raise DomainError(f'elliptic modulus must lie in (0, 1), got {k!r}')
        return cls(k, (1.0 - k) * (1.0 + k))

    @classmethod
    def from_complement(cls, kprime_sq: float) -> 'EllipticModulus':
        kprime_sq = float(kprime_sq)
        if not (0.0 < kprime_sq < 1.0):
            raise DomainError(f"k'^2 must lie in (0, 1), got {kprime_sq!r}")
        return cls(math.sqrt(1.0 - kprime_sq), kprime_sq)

    @property
    def kprime(self) -> float:
        return math.sqrt(self.kprime_sq)

    @property
    def k_sq(self) -> float:
        return self.k * self.k

    def complement(self) -> 'EllipticModulus':
        return EllipticModulus(self.kprime, self.k_sq)


ModulusLike = Union[EllipticModulus, float]


def as_modulus(k: ModulusLike) -> EllipticModulus:
    if isinstance(k, EllipticModulus):
        return k
    return EllipticModulus.of(k)


class JacobiTriple(NamedTuple):
    sn: Union[float, np.ndarray]
    cn: Union[float, np.ndarray]
    dn: Union[float, np.ndarray]


def agm(a: float, b: float) -> Tuple[List[float], List[float], List[float]]:
    """Returns the AGM sequences (a_n, b_n, c_n) starting from (a, b).

    c_0 is sqrt(a^2 - b^2) and c_{n+1} = (a_n - b_n) / 2. Iteration stops once
    |a_n - b_n| <= AGM_TOL * a_n or the pair stops changing.
    """
    a_s, b_s = [float(a)], [float(b)]
    c_s = [math.sqrt(max(a * a - b * b, 0.0))]
    for _ in range(AGM_MAX_ITER):
        a_n, b_n = a_s[-1], b_s[-1]
        if abs(a_n - b_n) <= AGM_TOL * a_n:
            break
        a_next, b_next = 0.5 * (a_n + b_n), math.sqrt(a_n * b_n)
        c_s.append(0.5 * (a_n - b_n))
        a_s.append(a_next)
        b_s.append(b_next)
        if a_next == a_n and b_next == b_n:
            break
    logger.debug('AGM(%r, %r) converged after %d steps', a, b, len(a_s) - 1)
    return a_s, b_s, c_s


def _agm_of(m: EllipticModulus):
    a_s, b_s, c_s = agm(1.0, m.kprime)
    # c_0 from 1 - k'^2 directly, not through the subtraction above
    c_s[0] = m.k
    return a_s, b_s, c_s


def complete_K(k: ModulusLike) -> float:
    """Complete elliptic integral of the first kind K(k)."""
    m = as_modulus(k)
    if m.k < DEGENERATE_TOL:
        return 0.5 * math.pi * (1.0 + m.k_sq / 4.0 + 9.0 * m.k_sq ** 2 / 64.0)
    if m.kprime < DEGENERATE_TOL:
        lg = math.log(4.0 / m.kprime)
        return lg + 0.25 * m.kprime_sq * (lg - 1.0)
    a_s, _, _ = _agm_of(m)
    return math.pi / (2.0 * a_s[-1])


def complete_E(k: ModulusLike) -> float:
    """Complete elliptic integral of the second kind E(k)."""
    m = as_modulus(k)
    if m.k < DEGENERATE_TOL:
        return 0.5 * math.pi * (1.0 - m.k_sq / 4.0 - 3.0 * m.k_sq ** 2 / 64.0)
    if m.kprime < DEGENERATE_TOL:
        lg = math.log(4.0 / m.kprime)
        return 1.0 + 0.5 * m.kprime_sq * (lg - 0.5)
    a_s, _, c_s = _agm_of(m)
    K = math.pi / (2.0 * a_s[-1])
    tail = math.fsum(2.0 ** (n - 1) * c * c for n, c in enumerate(c_s))
    return K * (1.0 - tail)


def dK_dk(k: ModulusLike) -> float:
    m = as_modulus(k)
    if m.k < SMALL_K_DERIVATIVE:
        return 0.5 * math.pi * (0.5 * m.k + 9.0 * m.k ** 3 / 16.0)
    K, E = complete_K(m), complete_E(m)
    return (E - m.kprime_sq * K) / (m.k * m.kprime_sq)


def dE_dk(k: ModulusLike) -> float:
    m = as_modulus(k)
    if m.k < SMALL_K_DERIVATIVE:
        return -0.5 * math.pi * (0.5 * m.k + 3.0 * m.k ** 3 / 16.0)
    return (complete_E(m) - complete_K(m)) / m.k


def _reduce(x: np.ndarray, K: float) -> np.ndarray:
    period = 4.0 * K
    return x - period * np.round(x / period)


def _jacobi_trig(x, m: EllipticModulus):
    s, c = np.sin(x), np.cos(x)
    corr = 0.25 * m.k_sq * (x - s * c)
    return s - corr * c, c + corr * s, 1.0 - 0.5 * m.k_sq * s * s


def _jacobi_hyperbolic(x, m: EllipticModulus):
    t, sech = np.tanh(x), 1.0 / np.cosh(x)
    sc = np.sinh(x) * np.cosh(x)
    q = 0.25 * m.kprime_sq
    sn = t + q * (sc - x) * sech * sech
    cn = sech - q * (sc - x) * t * sech
    dn = sech + q * (sc + x) * t * sech
    return sn, cn, dn


def _jacobi_landen(x, m: EllipticModulus):
    a_s, _, c_s = _agm_of(m)
    n_steps = len(a_s) - 1
    phi = (2.0 ** n_steps) * a_s[-1] * x
    for n in range(n_steps, 0, -1):
        phi = 0.5 * (phi + np.arcsin(c_s[n] / a_s[n] * np.sin(phi)))
    sn, cn = np.sin(phi), np.cos(phi)
    # dn^2 = k'^2 + k^2 cn^2 has no cancellation, unlike 1 - k^2 sn^2
    dn = np.sqrt(m.kprime_sq + m.k_sq * cn * cn)
    return sn, cn, dn


def jacobi(x, k: ModulusLike) -> JacobiTriple:
    """Returns (sn, cn, dn)(x; k); x may be a scalar or an array."""
    m = as_modulus(k)
    x_arr = np.asarray(x, dtype=float)
    if not np.all(np.isfinite(x_arr)):
        raise DomainError('jacobi: argument must be finite')
    xr = _reduce(x_arr, complete_K(m))

    if m.k < DEGENERATE_TOL:
        sn, cn, dn = _jacobi_trig(xr, m)
    else:
        sn, cn, dn = _jacobi_landen(xr, m)
        if m.kprime < DEGENERATE_TOL:
            near = np.abs(xr) <= 0.5 * complete_K(m)
            hs, hc, hd = _jacobi_hyperbolic(np.where(near, xr, 0.0), m)
            sn, cn, dn = (np.where(near, hs, sn), np.where(near, hc, cn),
                          np.where(near, hd, dn))

    if np.ndim(x) == 0:
        return JacobiTriple(float(sn), float(cn), float(dn))
    return JacobiTriple(sn, cn, dn)
