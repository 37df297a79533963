import json
import math
from dataclasses import asdict, dataclass, fields, replace
from pathlib import Path
from typing import Any, Dict, Mapping, Optional

from .errors import DomainError
from .grid import MIN_POINTS

PAIRING = {'yukawa': 'cnoidal', 'cubic': 'dnoidal'}
PERTURBATIONS = ('random_smooth', 'unstable_mode')
# moduli near 0.7 (cnoidal) and 0.8 (dnoidal) at L = 2 pi; both keep the low Lame levels apart
DEFAULT_SPEED = {'cnoidal': 0.6, 'dnoidal': 0.275}


@dataclass(frozen=True)
class RunConfig:
    """Everything a CLI run depends on. Flags override a JSON config file."""
    system: Optional[str] = None
    family: Optional[str] = None
    L: float = 2 * math.pi
    c: Optional[float] = None
    n: int = 256
    domain_multiple: int = 1
    dt: Optional[float] = None
    T: float = 10.0
    epsilon: float = 1e-3
    seed: int = 0
    zero_tol: Optional[float] = None
    output_dir: str = 'out'
    observe_every: int = 10
    perturbation: str = 'random_smooth'
    fit: bool = False
    free: bool = False
    sweep: int = 0

    @classmethod
    def from_json(cls, path) -> 'RunConfig':
        try:
            with open(path) as f:
                data = json.load(f)
        except (OSError, json.JSONDecodeError) as e:
            raise DomainError(f'cannot read config {path}: {e}') from e
        if not isinstance(data, dict):
            raise DomainError(f'config {path} must hold a JSON object')
        return cls().merged(data)

    def merged(self, overrides: Mapping[str, Any]) -> 'RunConfig':
        """Returns a copy with the non-None overrides applied."""
        known = {f.name for f in fields(self)}
        unknown = set(overrides) - known
        if unknown:
            raise DomainError(f'unknown config keys: {", ".join(sorted(unknown))}')
        return replace(self, **{k: v for k, v in overrides.items() if v is not None})

    def resolved(self) -> 'RunConfig':
        """Fills in the system/family pairing, the default speed and time step, then validates."""
        system, family = self.system, self.family
        if system is None and family is None:
            system, family = 'yukawa', 'cnoidal'
        elif system is None:
            system = next((s for s, f in PAIRING.items() if f == family), None)
            if system is None:
                raise DomainError(f'unknown wave family {family!r}')
        elif family is None:
            if system not in PAIRING:
                raise DomainError(f'unknown system {system!r}')
            family = PAIRING[system]
        if PAIRING.get(system) != family:
            raise DomainError(f'the {system} system carries {PAIRING.get(system)} waves, '
                              f'not {family}')
        dt = self.dt if self.dt is not None else 1e-3 * (self.L / (2 * math.pi)) ** 2
        c = self.c if self.c is not None else DEFAULT_SPEED[family]
        cfg = replace(self, system=system, family=family, c=c, dt=dt)
        cfg.validate()
        return cfg

    def validate(self):
        if not self.L > 0 or self.c is None or not self.c > 0:
            raise DomainError(f'need L > 0 and c > 0, got L={self.L!r}, c={self.c!r}')
        if self.n < MIN_POINTS or self.n % 2:
            raise DomainError(f'n must be an even integer >= {MIN_POINTS}, got {self.n!r}')
        if self.domain_multiple not in (1, 2):
            raise DomainError(f'domain_multiple must be 1 or 2, got {self.domain_multiple!r}')
        if not self.T > 0 or not (self.dt is None or 0 < self.dt <= self.T):
            raise DomainError(f'need T > 0 and 0 < dt <= T, got T={self.T!r}, dt={self.dt!r}')
        if not self.epsilon >= 0:
            raise DomainError(f'epsilon must be non-negative, got {self.epsilon!r}')
        if self.observe_every < 1:
            raise DomainError(f'observe_every must be >= 1, got {self.observe_every!r}')
        if self.perturbation not in PERTURBATIONS:
            raise DomainError(f'perturbation must be one of {PERTURBATIONS}')
        if self.sweep < 0:
            raise DomainError(f'sweep must be non-negative, got {self.sweep!r}')

    @property
    def output_path(self) -> Path:
        return Path(self.output_dir)

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)
