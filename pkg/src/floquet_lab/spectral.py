"""Conversions between truncated Fourier vectors and periodic grid samples.

A Fourier vector of truncation ``mf`` in ``n`` dimensions has length
``(2*mf + 1)**n``; entry order is lexicographic in the index
``m in [-mf, mf]^n`` with the first coordinate varying slowest.
"""

import numpy as np


def basis_size(n, mf):
    return (2 * mf + 1) ** n


def basis_indices(n, mf):
    width = 2 * mf + 1
    return np.indices((width,) * n).reshape(n, -1).T - mf


def _wrap(mf, ng):
    return np.arange(-mf, mf + 1) % ng


def vec_to_grid(vec, n, mf, ng):
    """Samples at ``x_j = j / ng`` of the trigonometric polynomial ``vec``."""
    if ng < 2 * mf + 1:
        raise ValueError(f"grid of {ng} points cannot hold truncation {mf}")
    width = 2 * mf + 1
    spec = np.zeros((ng,) * n, dtype=np.complex128)
    spec[np.ix_(*[_wrap(mf, ng)] * n)] = np.reshape(vec, (width,) * n)
    return np.fft.ifftn(spec) * ng**n


def grid_to_vec(values, mf):
    """Fourier coefficients with ``|m_i| <= mf`` of periodic grid samples."""
    values = np.asarray(values)
    n = values.ndim
    ng = values.shape[0]
    spec = np.fft.fftn(values) / ng**n
    half = (ng - 1) // 2
    if mf <= half:
        return spec[np.ix_(*[_wrap(mf, ng)] * n)].reshape(-1)
    # modes beyond the sampling limit vanish for the trigonometric interpolant
    out = np.zeros((2 * mf + 1,) * n, dtype=np.complex128)
    inner = (slice(mf - half, mf + half + 1),) * n
    out[inner] = spec[np.ix_(*[_wrap(half, ng)] * n)]
    return out.reshape(-1)


def derivative_vec(vec, n, mf, axis):
    """Fourier vector of the partial derivative along ``axis``."""
    m = basis_indices(n, mf)[:, axis]
    return 2j * np.pi * m * np.asarray(vec)


def mean_vec(vec, n, mf):
    """Cell average (the zeroth coefficient)."""
    return np.asarray(vec)[basis_size(n, mf) // 2]


def eval_vec(vec, n, mf, points):
    """Evaluate at arbitrary points of shape ``(npts, n)``."""
    points = np.atleast_2d(points)
    m = basis_indices(n, mf)
    phase = np.exp(2j * np.pi * points @ m.T)
    return phase @ np.asarray(vec)


def resample(values, ng):
    """Trigonometric interpolation of periodic samples onto an ``ng`` grid."""
    values = np.asarray(values)
    n = values.ndim
    m_old = values.shape[0]
    if m_old == ng:
        return values.astype(np.complex128)
    half = (min(m_old, ng) - 1) // 2
    vec = grid_to_vec(values, half)
    return vec_to_grid(vec, n, half, ng)


def cell_grid(n, ng):
    """Grid points ``j / ng`` of the unit cell, shape ``(ng**n, n)``."""
    idx = np.indices((ng,) * n).reshape(n, -1).T
    return idx / ng


def jet_vec(vec, n, mf, points):
    """Value, gradient ``(npts, n)`` and Hessian ``(npts, n, n)`` at arbitrary points."""
    points = np.atleast_2d(points)
    m = basis_indices(n, mf)
    phase = np.exp(2j * np.pi * points @ m.T)
    w = 2j * np.pi * m
    vec = np.asarray(vec)
    val = phase @ vec
    grad = phase @ (w * vec[:, None])
    hess = np.einsum("pm,mi,mj->pij", phase, w, w * vec[:, None])
    return val, grad, hess
