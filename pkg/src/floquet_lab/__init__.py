"""Periodic elliptic operators: Bloch bands, positive solutions and polynomial growth."""

__version__ = "0.1.0"

from .errors import ConfigError, FloquetLabError  # noqa: E402
from .kernels import BACKEND  # noqa: E402
from .operator_model import (  # noqa: E402
    CoefficientField,
    Lattice,
    PeriodicOperator,
    assemble_shifted,
    build_operator,
    divergence_form,
    general,
    magnetic_schrodinger,
    schrodinger,
)

__all__ = [
    "BACKEND",
    "CoefficientField",
    "ConfigError",
    "FloquetLabError",
    "Lattice",
    "PeriodicOperator",
    "__version__",
    "assemble_shifted",
    "build_operator",
    "divergence_form",
    "general",
    "magnetic_schrodinger",
    "schrodinger",
]
