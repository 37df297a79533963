from .elliptic import EllipticModulus, complete_E, complete_K, jacobi
from .errors import (BlowUpError, ClaimFailure, DomainError, KernelAmbiguityError, KGSError,
                     NoPeriodicWaveError, NumericalError)
from .grid import PeriodicGrid, SampledField
from .waves import CNOIDAL, DNOIDAL, WaveProfile, make_wave, solitary_profile
from .hillspec import eig_sym, verify_counts
from .stability import CubicSystem, YukawaSystem, instability_index, linearized_spectrum
from .evolve import FieldState, Stepper, orbital_distance, run
from .config import RunConfig
