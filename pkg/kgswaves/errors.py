class KGSError(Exception):
    """Base class for every error raised by kgswaves."""


class DomainError(KGSError, ValueError):
    """An input lies outside the domain of the requested operation."""


class NoPeriodicWaveError(DomainError):
    """The wave speed does not admit a periodic wave of the requested period."""

    def __init__(self, family: str, c: float, L: float, threshold: float,
                 threshold_text: str):
        self.family = family
        self.c = c
        self.L = L
        self.threshold = threshold
        super().__init__(
            f'no {family} wave with period L={L!r} at c={c!r}: '
            f'c must lie in ({threshold_text}, +inf) = ({threshold!r}, +inf)')


class NumericalError(KGSError, RuntimeError):
    """A numerical procedure failed (bracketing, eigensolver, ...)."""


class KernelAmbiguityError(NumericalError):
    """An eigenvalue sits too close to zero to be classified reliably."""

    def __init__(self, eigenvalue: float, zero_tol: float):
        self.eigenvalue = eigenvalue
        self.zero_tol = zero_tol
        super().__init__(
            f'eigenvalue {eigenvalue!r} is within 10*zero_tol but outside '
            f'zero_tol={zero_tol!r}; kernel detection is ambiguous')


class BlowUpError(NumericalError):
    """The time integration produced non-finite values."""

    def __init__(self, time: float, diagnostics=None):
        self.time = time
        self.diagnostics = diagnostics
        super().__init__(f'non-finite field values at t={time!r}')


class ClaimFailure(KGSError):
    """A verified spectral or dynamical claim does not hold."""
