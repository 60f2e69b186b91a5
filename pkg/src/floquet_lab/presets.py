"""Bundled test operators."""

import numpy as np

from . import operator_model as om
from .errors import ConfigError

TWO_PI = 2 * np.pi


def laplacian(n=2, resolution=8):
    return om.general(None, None, 0.0, n=n, resolution=resolution, label=f"laplacian{n}d")


def mathieu(resolution=32):
    """``-d^2/dx^2 + cos(2 pi x)``."""
    V = om.CoefficientField.from_function(lambda x: np.cos(TWO_PI * x), 1, resolution)
    return om.schrodinger(V, n=1, resolution=resolution, label="mathieu")


def sin_divform(resolution=32):
    """``-d/dx (2 + sin 2 pi x) d/dx``."""
    a = om.CoefficientField.from_function(lambda x: 2 + np.sin(TWO_PI * x), 1, resolution)
    return om.divergence_form(a, n=1, resolution=resolution, label="sin_divform")


def drift1d(resolution=8):
    """``-d^2/dx^2 + 2 d/dx``."""
    return om.general(None, [2.0], 0.0, n=1, resolution=resolution, label="drift1d")


def shifted1d(resolution=8):
    """``-d^2/dx^2 + 1``."""
    return om.general(None, None, 1.0, n=1, resolution=resolution, label="shifted1d")


def checker2d(resolution=16):
    """``-div(s(x) A0 grad)`` with ``s = 2 + sin 2 pi x1 sin 2 pi x2``."""
    s = om.CoefficientField.from_function(
        lambda x, y: 2 + np.sin(TWO_PI * x) * np.sin(TWO_PI * y), 2, resolution
    ).values
    a0 = np.array([[1.0, 0.25], [0.25, 1.0]])
    a = [[a0[i, j] * s for j in range(2)] for i in range(2)]
    return om.divergence_form(a, n=2, resolution=resolution, label="checker2d")


def shear2d(resolution=16):
    """``-Laplacian + sin(2 pi x2) d/dx1``: drift with zero average against the invariant density."""
    b1 = om.CoefficientField.from_function(lambda x, y: np.sin(TWO_PI * y), 2, resolution).values
    return om.general(None, [b1, 0.0], 0.0, n=2, resolution=resolution, label="shear2d")


_REGISTRY = {
    "laplacian": lambda n=None, resolution=None: laplacian(n or 2, resolution or 8),
    "laplacian1d": lambda n=None, resolution=None: laplacian(1, resolution or 8),
    "laplacian2d": lambda n=None, resolution=None: laplacian(2, resolution or 8),
    "laplacian3d": lambda n=None, resolution=None: laplacian(3, resolution or 4),
    "mathieu": lambda n=None, resolution=None: mathieu(resolution or 32),
    "sin_divform": lambda n=None, resolution=None: sin_divform(resolution or 32),
    "drift1d": lambda n=None, resolution=None: drift1d(resolution or 8),
    "shifted1d": lambda n=None, resolution=None: shifted1d(resolution or 8),
    "checker2d": lambda n=None, resolution=None: checker2d(resolution or 16),
    "shear2d": lambda n=None, resolution=None: shear2d(resolution or 16),
}

# Truncation orders used by the acceptance runs; spectral convergence is checked in tests.
RECOMMENDED_MF = {
    "laplacian1d": 8, "laplacian2d": 6, "laplacian3d": 3, "mathieu": 32, "sin_divform": 32,
    "drift1d": 8, "shifted1d": 8, "checker2d": 8, "shear2d": 8,
}

# Cell solves are linear, so the corrector truncation can exceed the eigenproblem one.
CELL_MF = {"checker2d": 16}

NAMES = tuple(_REGISTRY)


def get(name, n=None, resolution=None):
    try:
        builder = _REGISTRY[name]
    except KeyError:
        raise ConfigError(f"unknown preset {name!r}; choose from {', '.join(NAMES)}") from None
    op = builder(n=n, resolution=resolution)
    key = f"laplacian{op.n}d" if name == "laplacian" else name
    if key in RECOMMENDED_MF:
        op.meta.setdefault("mf", RECOMMENDED_MF[key])
    if key in CELL_MF:
        op.meta.setdefault("cell_mf", CELL_MF[key])
    op.meta.setdefault("preset", key)
    return op
