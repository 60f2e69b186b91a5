"""Periodic second-order operators on the unit torus and their shifted matrices.

Operators are kept in non-divergence form

    L = -sum a_ij d_i d_j + sum b_i d_i + c

with coefficients sampled on a uniform grid of the unit cell ``K = [0, 1)^n``.
The shifted operator ``L(x, D + k)``, ``D = -i d``, is discretized by
Fourier-Galerkin truncation to indices ``|m_i| <= mf``.
"""

from __future__ import annotations

import numbers
import warnings
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from . import kernels, spectral
from .errors import (
    AliasingRisk,
    AsymmetricA,
    ConfigError,
    NonFiniteInput,
    NotElliptic,
    ResolutionMismatch,
)

KINDS = ("GeneralSecondOrder", "Schrodinger", "MagneticSchrodinger", "DivergenceForm")

DEFAULT_MF = {1: 16, 2: 16, 3: 8}

# Fourier coefficients below this fraction of the largest one are treated as zero.
SUPPORT_TOL = 1e-14


@dataclass(frozen=True)
class Lattice:
    """The integer lattice ``Z^n`` with its unit cell and Brillouin zone."""

    n: int

    def __post_init__(self):
        if self.n not in (1, 2, 3):
            raise ConfigError(f"dimension must be 1, 2 or 3, got {self.n}")

    @property
    def reciprocal_basis(self):
        return 2 * np.pi * np.eye(self.n)

    @property
    def cell_volume(self):
        return 1.0

    @property
    def brillouin_volume(self):
        return (2 * np.pi) ** self.n

    def wrap(self, k):
        """Representative of ``k`` modulo ``(2 pi Z)^n`` in ``[-pi, pi)^n``."""
        k = np.asarray(k, dtype=float)
        return (k + np.pi) % (2 * np.pi) - np.pi

    def distance(self, k1, k2):
        """Distance between quasimomenta modulo the reciprocal lattice."""
        d = self.wrap(np.asarray(k1, dtype=float) - np.asarray(k2, dtype=float))
        return float(np.linalg.norm(d))


class CoefficientField:
    """A periodic scalar field sampled on an ``M^n`` grid of the unit cell."""

    def __init__(self, values):
        values = np.asarray(values, dtype=np.complex128)
        if values.ndim not in (1, 2, 3) or len(set(values.shape)) != 1:
            raise ResolutionMismatch(f"field must be sampled on a cubic grid, got {values.shape}")
        if not np.all(np.isfinite(values)):
            raise NonFiniteInput("coefficient samples contain inf or nan")
        self.values = values
        self.values.setflags(write=False)

    @classmethod
    def from_function(cls, fn, n, resolution):
        pts = spectral.cell_grid(n, resolution)
        vals = np.asarray(fn(*pts.T), dtype=np.complex128)
        if vals.ndim == 0:
            vals = np.full(len(pts), vals)
        return cls(vals.reshape((resolution,) * n))

    @classmethod
    def constant(cls, value, n, resolution):
        return cls(np.full((resolution,) * n, value, dtype=np.complex128))

    @property
    def n(self):
        return self.values.ndim

    @property
    def resolution(self):
        return self.values.shape[0]

    @cached_property
    def fourier(self):
        """Centered coefficient table; entry ``p`` sits at index ``p + M//2``."""
        spec = np.fft.fftn(self.values) / self.values.size
        return np.fft.fftshift(spec)

    @cached_property
    def bandwidth(self):
        tab = np.abs(self.fourier)
        top = tab.max()
        if top == 0.0:
            return 0
        p = np.argwhere(tab > SUPPORT_TOL * max(top, 1.0)) - self.resolution // 2
        return int(np.abs(p).max()) if p.size else 0

    @property
    def band_limited(self):
        return 2 * self.bandwidth < self.resolution

    @property
    def is_real(self):
        return bool(np.max(np.abs(self.values.imag), initial=0.0) <= 1e-12)

    def mean(self):
        return complex(self.values.mean())

    def derivative(self, axis):
        m = self.resolution
        freq = np.fft.fftfreq(m, d=1.0 / m)
        shape = [1] * self.n
        shape[axis] = m
        spec = np.fft.fftn(self.values) * (2j * np.pi * freq.reshape(shape))
        return CoefficientField(np.fft.ifftn(spec))

    def __add__(self, other):
        return CoefficientField(self.values + _values(other))

    def __mul__(self, other):
        return CoefficientField(self.values * _values(other))

    __radd__ = __add__
    __rmul__ = __mul__

    def __neg__(self):
        return CoefficientField(-self.values)


def _values(obj):
    return obj.values if isinstance(obj, CoefficientField) else obj


@dataclass(frozen=True)
class PeriodicOperator:
    """Validated operator ``-a:D^2 + b.grad + c`` with periodic coefficients.

    ``a`` has shape ``(n, n, M, ..., M)``, ``b`` shape ``(n, M, ..., M)`` and
    ``c`` shape ``(M, ..., M)``; all complex arrays of grid samples.
    """

    kind: str
    a: np.ndarray
    b: np.ndarray
    c: np.ndarray
    a_min: float
    A_mag: np.ndarray | None = None
    V: np.ndarray | None = None
    a_div: np.ndarray | None = None
    label: str = ""
    meta: dict = field(default_factory=dict, compare=False)

    @property
    def n(self):
        return self.c.ndim

    @property
    def resolution(self):
        return self.c.shape[0]

    @property
    def lattice(self):
        return Lattice(self.n)

    @property
    def default_mf(self):
        return int(self.meta.get("mf", DEFAULT_MF[self.n]))

    @cached_property
    def is_real(self):
        return bool(
            max(np.abs(self.a.imag).max(), np.abs(self.b.imag).max(), np.abs(self.c.imag).max())
            <= 1e-12
        )

    @cached_property
    def c_is_zero(self):
        return bool(np.abs(self.c).max() <= 1e-12)

    @cached_property
    def _tables(self):
        scale = self.c.size
        shift = lambda v: np.fft.fftshift(np.fft.fftn(v, axes=tuple(range(-self.n, 0))) / scale,
                                          axes=tuple(range(-self.n, 0)))
        return shift(self.a), shift(self.b), shift(self.c)

    @cached_property
    def support(self):
        """Fourier offsets with nonzero coefficients and the coefficient values there."""
        at, bt, ct = self._tables
        top = max(np.abs(at).max(), np.abs(bt).max(), np.abs(ct).max(), 1.0)
        mask = (
            (np.abs(at) > SUPPORT_TOL * top).any(axis=(0, 1))
            | (np.abs(bt) > SUPPORT_TOL * top).any(axis=0)
            | (np.abs(ct) > SUPPORT_TOL * top)
        )
        idx = np.argwhere(mask)
        if idx.size == 0:
            idx = np.zeros((1, self.n), dtype=np.int64) + self.resolution // 2
        sel = tuple(idx.T)
        offsets = np.ascontiguousarray(idx - self.resolution // 2, dtype=np.int64)
        a_sup = np.ascontiguousarray(np.moveaxis(at[(slice(None), slice(None)) + sel], -1, 0))
        b_sup = np.ascontiguousarray(np.moveaxis(bt[(slice(None),) + sel], -1, 0))
        c_sup = np.ascontiguousarray(ct[sel])
        return offsets, a_sup, b_sup, c_sup

    @cached_property
    def bandwidth(self):
        return int(np.abs(self.support[0]).max())

    def field(self, name, *index):
        arr = getattr(self, name)
        return CoefficientField(arr[index] if index else arr)

    def shifted(self, c0):
        """The operator ``L + c0``."""
        V = None if self.V is None else self.V + c0
        return _replace(self, c=self.c + c0, V=V)

    def transpose(self):
        """Formal transpose ``L^t u = -d_i d_j(a_ij u) - d_i(b_i u) + c u`` in non-divergence form."""
        n = self.n
        a_f = [[self.field("a", i, j) for j in range(n)] for i in range(n)]
        b_new = np.empty_like(self.b)
        c_new = self.c.copy()
        for i in range(n):
            div_ai = sum(a_f[i][j].derivative(j).values for j in range(n))
            b_new[i] = -self.b[i] - 2 * div_ai
            c_new = c_new - CoefficientField(div_ai).derivative(i).values
            c_new = c_new - self.field("b", i).derivative(i).values
        return PeriodicOperator(
            kind="GeneralSecondOrder", a=self.a, b=b_new, c=c_new, a_min=self.a_min,
            label=f"{self.label}^t" if self.label else "",
        )

    def evaluate(self, points):
        """Coefficients at arbitrary points: ``a`` (npts, n, n), ``b`` (npts, n), ``c`` (npts,)."""
        offsets, a_sup, b_sup, c_sup = self.support
        phase = np.exp(2j * np.pi * np.atleast_2d(points) @ offsets.T)
        return (np.einsum("ps,sij->pij", phase, a_sup), phase @ b_sup, phase @ c_sup)

    def apply_jet(self, points, value, grad, hess):
        """``L u`` at points from the jet (value, gradient, Hessian) of ``u`` there."""
        a, b, c = self.evaluate(points)
        return -np.einsum("pij,pij->p", a, hess) + np.einsum("pi,pi->p", b, grad) + c * value

    def apply_grid(self, values):
        """Apply ``L`` to periodic grid samples (same resolution) spectrally."""
        f = CoefficientField(values)
        out = self.c * f.values
        grads = [f.derivative(i) for i in range(self.n)]
        for i in range(self.n):
            out = out + self.b[i] * grads[i].values
            for j in range(self.n):
                out = out - self.a[i, j] * grads[j].derivative(i).values
        return out


def _replace(op, **changes):
    from dataclasses import replace

    new = replace(op, **changes)
    return new


def _ellipticity(a):
    n = a.shape[0]
    if np.abs(a.imag).max() > 1e-12:
        raise AsymmetricA("principal coefficients must be real")
    ar = a.real
    if np.abs(ar - np.swapaxes(ar, 0, 1)).max() > 1e-12:
        raise AsymmetricA("principal coefficient matrix is not symmetric")
    pts = np.moveaxis(ar.reshape(n, n, -1), -1, 0)
    amin = float(np.linalg.eigvalsh(pts).min())
    if amin <= 0:
        raise NotElliptic(f"min eigenvalue of a(x) is {amin:.3e} <= 0")
    return amin


def _as_grid(value, n, resolution, name):
    if isinstance(value, CoefficientField):
        value = value.values
    arr = np.asarray(value, dtype=np.complex128)
    if arr.ndim == 0:
        return np.full((resolution,) * n, arr, dtype=np.complex128)
    if arr.shape != (resolution,) * n:
        raise ResolutionMismatch(f"{name}: expected grid {(resolution,) * n}, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise NonFiniteInput(f"{name} contains inf or nan")
    return arr


def _matrix_field(a, n, resolution, name="a"):
    if a is None:
        a = np.eye(n)
    if _is_scalar(a):
        a = complex(a) * np.eye(n)
    if n == 1 and not _is_nested_matrix(a, n):
        a = [[a]]
    out = np.empty((n, n) + (resolution,) * n, dtype=np.complex128)
    try:
        for i in range(n):
            for j in range(n):
                out[i, j] = _as_grid(a[i][j], n, resolution, name)
    except (IndexError, TypeError) as exc:
        raise ResolutionMismatch(f"{name}: expected an {n}x{n} matrix of fields") from exc
    return out


def _is_scalar(x):
    return isinstance(x, numbers.Number) or (isinstance(x, np.ndarray) and x.ndim == 0)


def _is_nested_matrix(a, n):
    try:
        return len(a) == n and all(len(row) == n for row in a)
    except TypeError:
        return False


def _vector_field(b, n, resolution, name="b"):
    out = np.zeros((n,) + (resolution,) * n, dtype=np.complex128)
    if b is None:
        return out
    if _is_scalar(b):
        b = [b] * n
    elif n == 1 and np.shape(b) == (resolution,):
        b = [b]
    if len(b) != n:
        raise ResolutionMismatch(f"{name}: expected {n} components")
    for i in range(n):
        out[i] = _as_grid(b[i], n, resolution, name)
    return out


def general(a=None, b=None, c=0.0, *, n, resolution, label=""):
    """Operator ``-a:D^2 + b.grad + c`` from grid samples or constants."""
    a_arr = _matrix_field(a, n, resolution)
    return PeriodicOperator(
        kind="GeneralSecondOrder", a=a_arr, b=_vector_field(b, n, resolution),
        c=_as_grid(c, n, resolution, "c"), a_min=_ellipticity(a_arr), label=label,
    )


def schrodinger(V, *, n, resolution, label=""):
    """``-Laplacian + V``."""
    V_arr = _as_grid(V, n, resolution, "V")
    a_arr = _matrix_field(None, n, resolution)
    return PeriodicOperator(
        kind="Schrodinger", a=a_arr, b=_vector_field(None, n, resolution), c=V_arr.copy(),
        a_min=_ellipticity(a_arr), V=V_arr, label=label,
    )


def magnetic_schrodinger(A, V=0.0, *, n, resolution, label=""):
    """``(i grad + A)^2 + V`` expanded to ``-Laplacian + 2i A.grad + (i div A + |A|^2 + V)``."""
    A_arr = _vector_field(A, n, resolution, "A")
    if np.abs(A_arr.imag).max() > 1e-12:
        raise ConfigError("magnetic potential must be real")
    V_arr = _as_grid(V, n, resolution, "V")
    div_A = sum(CoefficientField(A_arr[i]).derivative(i).values for i in range(n))
    c = 1j * div_A + np.sum(A_arr**2, axis=0) + V_arr
    a_arr = _matrix_field(None, n, resolution)
    return PeriodicOperator(
        kind="MagneticSchrodinger", a=a_arr, b=2j * A_arr, c=c,
        a_min=_ellipticity(a_arr), A_mag=A_arr, V=V_arr, label=label,
    )


def divergence_form(a, c=0.0, *, n, resolution, label=""):
    """``-div(a grad) + c`` stored as ``-a:D^2 + b~.grad + c`` with ``b~_i = -sum_j d_j a_ij``."""
    a_arr = _matrix_field(a, n, resolution)
    amin = _ellipticity(a_arr)
    b = np.zeros((n,) + (resolution,) * n, dtype=np.complex128)
    for i in range(n):
        for j in range(n):
            b[i] -= CoefficientField(a_arr[i, j]).derivative(j).values
    return PeriodicOperator(
        kind="DivergenceForm", a=a_arr, b=b, c=_as_grid(c, n, resolution, "c"),
        a_min=amin, a_div=a_arr, label=label,
    )


def build_operator(spec):
    """Operator from a JSON-style description.

    ``spec`` holds ``kind``, ``n``, ``grid_resolution`` and ``coefficients``; the
    latter is either a preset name or a mapping with entries ``a, b, c, A, V`` given
    as constants or nested arrays of grid samples.
    """
    from . import presets

    coeffs = spec.get("coefficients", {})
    if isinstance(coeffs, str):
        return presets.get(coeffs, n=spec.get("n"), resolution=spec.get("grid_resolution"))
    try:
        kind = spec.get("kind", "GeneralSecondOrder")
        n = int(spec["n"])
        res = int(spec.get("grid_resolution", 32))
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"malformed operator spec: {exc}") from exc
    Lattice(n)
    label = spec.get("label", "")
    if kind == "GeneralSecondOrder":
        return general(coeffs.get("a"), coeffs.get("b"), coeffs.get("c", 0.0), n=n,
                       resolution=res, label=label)
    if kind == "Schrodinger":
        return schrodinger(coeffs.get("V", coeffs.get("c", 0.0)), n=n, resolution=res, label=label)
    if kind == "MagneticSchrodinger":
        return magnetic_schrodinger(coeffs.get("A"), coeffs.get("V", 0.0), n=n, resolution=res,
                                    label=label)
    if kind == "DivergenceForm":
        return divergence_form(coeffs.get("a"), coeffs.get("c", 0.0), n=n, resolution=res,
                               label=label)
    raise ConfigError(f"unknown operator kind {kind!r}; expected one of {KINDS}")


@dataclass(frozen=True)
class ShiftedOperatorMatrix:
    """Dense Galerkin matrix of ``L(x, D + k)`` (or of ``L^t(x, D + k)`` when ``adjoint``)."""

    k: np.ndarray
    mf: int
    matrix: np.ndarray
    adjoint: bool = False

    @property
    def n(self):
        return len(self.k)

    @property
    def basis(self):
        return spectral.basis_indices(self.n, self.mf)

    @property
    def size(self):
        return self.matrix.shape[0]


def assemble_shifted(op, k, mf=None, adjoint=False):
    """Fourier-Galerkin matrix of the shifted operator.

    With ``adjoint`` set the matrix represents the formal transpose ``L^t(x, D + k)``,
    whose spectrum equals that of ``L(x, D - k)``.
    """
    mf = op.default_mf if mf is None else int(mf)
    k = np.atleast_1d(np.asarray(k, dtype=np.complex128))
    if k.shape != (op.n,):
        raise ConfigError(f"quasimomentum must have {op.n} components")
    if not np.all(np.isfinite(k)):
        raise NonFiniteInput("quasimomentum is not finite")
    if mf < 2 * op.bandwidth:
        warnings.warn(
            f"truncation {mf} below twice the coefficient bandwidth {op.bandwidth}",
            AliasingRisk, stacklevel=2,
        )
    offsets, a_sup, b_sup, c_sup = op.support
    mat = kernels.assemble_galerkin(mf, op.n, np.ascontiguousarray(k), offsets, a_sup, b_sup,
                                    c_sup, bool(adjoint))
    return ShiftedOperatorMatrix(k=k, mf=mf, matrix=mat, adjoint=bool(adjoint))


def convolution_matrix(offsets, coeffs, n, mf):
    """Galerkin matrix ``T[p, q] = f_hat(m_p - m_q)`` of multiplication by a field."""
    m = spectral.basis_indices(n, mf)
    width = 4 * mf + 1
    diff = m[:, None, :] - m[None, :, :] + 2 * mf
    code = np.zeros(diff.shape[:2], dtype=np.int64)
    for d in range(n):
        code = code * width + diff[..., d]
    table = np.zeros(width**n, dtype=np.complex128)
    for s, v in zip(offsets, coeffs):
        if np.all(np.abs(s) <= 2 * mf):
            idx = 0
            for d in range(n):
                idx = idx * width + int(s[d]) + 2 * mf
            table[idx] = v
    return table[code]


@dataclass(frozen=True)
class GalerkinParts:
    """Multiplication matrices of the coefficients and the derivative diagonals at ``k = 0``."""

    a: np.ndarray  # (n, n, N, N)
    b: np.ndarray  # (n, N, N)
    c: np.ndarray  # (N, N)
    d: np.ndarray  # (n, N) diagonal of d/dx_i

    def first_order(self, i):
        """Matrix of ``v -> -2 sum_j a_ij d_j v + b_i v``."""
        return -2 * sum(self.a[i, j] * self.d[j][None, :] for j in range(len(self.d))) + self.b[i]


def galerkin_parts(op, mf=None):
    mf = op.default_mf if mf is None else int(mf)
    n = op.n
    offsets, a_sup, b_sup, c_sup = op.support
    a = np.array([[convolution_matrix(offsets, a_sup[:, i, j], n, mf) for j in range(n)]
                  for i in range(n)])
    b = np.array([convolution_matrix(offsets, b_sup[:, i], n, mf) for i in range(n)])
    c = convolution_matrix(offsets, c_sup, n, mf)
    d = 2j * np.pi * spectral.basis_indices(n, mf).T
    return GalerkinParts(a=a, b=b, c=c, d=d)
