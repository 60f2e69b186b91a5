"""Numerical tolerances and run configuration."""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields

from .errors import ConfigError


@dataclass(frozen=True)
class Tolerances:
    fermi: float = 1e-7  # smallest singular value accepted as a zero
    merge_radius: float = 1e-4  # Fermi points closer than this (mod 2 pi) coincide
    gap: float = 1e-6  # spectral gap certifying a simple eigenvalue
    taylor_zero: float = 1e-6  # Taylor terms below this norm count as zero
    level: float = 1e-7  # |Lambda_0| below this means Lambda_0 = 0
    hess: float = 1e-8  # Hessian eigenvalues must stay below -hess
    residual: float = 1e-6  # relative grid residual for constructed solutions
    trace: float = 1e-8  # |tr(Q C^T)| admissible for quadratic solutions
    compat: float = 1e-8  # Fredholm compatibility residual for cell solves
    rank: float = 1e-9  # relative singular value threshold for ranks

    def __post_init__(self):
        for f in fields(self):
            if not getattr(self, f.name) > 0:
                raise ConfigError(f"tolerance {f.name} must be positive")

    def replace(self, **changes):
        unknown = set(changes) - {f.name for f in fields(self)}
        if unknown:
            raise ConfigError(f"unknown tolerance(s): {', '.join(sorted(unknown))}")
        data = asdict(self)
        data.update({k: float(v) for k, v in changes.items()})
        return Tolerances(**data)


DEFAULT_TOL = Tolerances()


@dataclass
class RunConfig:
    command: str
    preset: str | None = None
    spec: str | None = None
    resolution: int | None = None
    nmax: int = 2
    level: float = 0.0
    out: str = "out"
    seed: int = 0
    threads: int = 1
    tolerances: Tolerances = field(default_factory=Tolerances)
    params: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.resolution is not None and not 1 <= self.resolution <= 64:
            raise ConfigError("resolution must lie in [1, 64]")
        if self.nmax < 0:
            raise ConfigError("nmax must be nonnegative")
        if self.threads < 1:
            raise ConfigError("threads must be positive")

    def to_dict(self):
        data = asdict(self)
        data["tolerances"] = asdict(self.tolerances)
        return data

    @classmethod
    def from_dict(cls, data):
        data = dict(data)
        data["tolerances"] = Tolerances(**data.get("tolerances", {}))
        return cls(**data)

    def to_json(self):
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_json(cls, text):
        return cls.from_dict(json.loads(text))
