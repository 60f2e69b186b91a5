"""Pure numpy fallback for the compiled assembly kernel."""

import numpy as np


def assemble_galerkin(mf, n, k, offsets, a_sup, b_sup, c_sup, adjoint):
    """Galerkin matrix of a second-order operator in the truncated Fourier basis.

    Column ``c`` holds the image of ``exp(2 pi i m_c . x)``; only coefficient
    offsets listed in ``offsets`` contribute, so the cost is O(size * support).
    """
    width = 2 * mf + 1
    grid = np.indices((width,) * n).reshape(n, -1).T - mf
    size = grid.shape[0]
    out = np.zeros((size, size), dtype=np.complex128)
    strides = width ** np.arange(n - 1, -1, -1)
    k = np.asarray(k, dtype=np.complex128)
    sign = -1.0 if adjoint else 1.0
    for s in range(offsets.shape[0]):
        target = grid + offsets[s]
        ok = np.all(np.abs(target) <= mf, axis=1)
        cols = np.nonzero(ok)[0]
        rows = (target[ok] + mf) @ strides
        base = target[ok] if adjoint else grid[cols]
        kappa = 2.0 * np.pi * base + k
        val = np.full(cols.size, c_sup[s], dtype=np.complex128)
        val += sign * 1j * (kappa @ b_sup[s])
        val += np.einsum("ri,ij,rj->r", kappa, a_sup[s], kappa)
        out[rows, cols] += val
    return out
