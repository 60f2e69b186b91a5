"""Independent reference computations, written without the package.

Each function uses only numpy/scipy and textbook formulas; ``make_oracles.py``
freezes their output in ``oracle_values.json``.
"""

import numpy as np
from scipy import integrate, linalg, optimize

TWO_PI = 2 * np.pi


def mathieu_matrix(k, mf=32):
    """Plane-wave matrix of ``-(d/dx + ik)^2 + cos 2 pi x``: diagonal ``(2 pi m + k)^2``, off-diagonal 1/2."""
    m = np.arange(-mf, mf + 1)
    return np.diag((TWO_PI * m + k) ** 2) + 0.5 * (np.eye(2 * mf + 1, k=1) + np.eye(2 * mf + 1, k=-1))


def mathieu_lowest(k, mf=32):
    return float(linalg.eigvalsh(mathieu_matrix(k, mf))[0])


def mathieu_second(k, mf=32):
    return float(linalg.eigvalsh(mathieu_matrix(k, mf))[1])


def mathieu_curvature(mf=32, h=1e-3):
    f = [mathieu_lowest(s * h, mf) for s in (-2, -1, 0, 1, 2)]
    return float((-f[0] + 16 * f[1] - 30 * f[2] + 16 * f[3] - f[4]) / (12 * h * h))


def mathieu_fermi(mf=32):
    """Positive root of ``lambda_1(k) = 0`` on ``(0, pi)``."""
    return float(optimize.brentq(lambda k: mathieu_lowest(k, mf), 1e-6, np.pi, xtol=1e-14))


def mathieu_ground_state(mf=32, ng=65):
    """Ground state of the torus problem on a grid, normalized to 1 at x = 0."""
    w, v = linalg.eigh(mathieu_matrix(0.0, mf))
    c = v[:, 0]
    x = np.arange(ng) / ng
    m = np.arange(-mf, mf + 1)
    u = (np.exp(2j * np.pi * np.outer(x, m)) @ c).real
    return u / u[0]


def harmonic_mean_sin():
    """``(int_0^1 dx / (2 + sin 2 pi x))^-1``."""
    val, _ = integrate.quad(lambda x: 1.0 / (2 + np.sin(TWO_PI * x)), 0, 1, epsabs=1e-14,
                            epsrel=1e-14, limit=200)
    return 1.0 / val


def sin_corrector(x):
    """Zero-mean ``Psi`` with ``Psi' = Q / a - 1`` for ``a = 2 + sin 2 pi x``."""
    Q = harmonic_mean_sin()
    grid = np.linspace(0, 1, 2001)
    prim = integrate.cumulative_trapezoid(Q / (2 + np.sin(TWO_PI * grid)) - 1, grid, initial=0)
    prim -= integrate.trapezoid(prim, grid)
    return np.interp(np.mod(x, 1.0), grid, prim)


def spectral_derivative_sin(x, res=32):
    """Spectral derivative of ``a = 2 + sin 2 pi x`` sampled on ``res`` points."""
    grid = np.arange(res) / res
    a_hat = np.fft.fft(2 + np.sin(TWO_PI * grid))
    freqs = np.fft.fftfreq(res, d=1.0 / res)
    coeff = 2j * np.pi * freqs * a_hat / res
    return (np.exp(2j * np.pi * np.outer(x, freqs)) @ coeff).real


def derivative_2x2_null(coeffs):
    """Null space dimension of a 1 x 3 row (brute force SVD)."""
    row = np.atleast_2d(coeffs)
    s = linalg.svdvals(row)
    return 3 - int((s > 1e-12 * max(s.max(), 1)).sum())


def drift_lambda(xi):
    """``Lambda(xi) = -xi^2 + 2 xi`` for ``-u'' + 2u'``."""
    return -xi * xi + 2 * xi


def all_oracles():
    x = np.array([0.0, 0.125, 0.3, 0.5, 0.77])
    return {
        "mathieu_lambda1_0": mathieu_lowest(0.0),
        "mathieu_lambda2_0": mathieu_second(0.0),
        "mathieu_lambda1_pi": mathieu_lowest(np.pi),
        "mathieu_lambda2_pi": mathieu_second(np.pi),
        "mathieu_curvature_0": mathieu_curvature(),
        "mathieu_fermi_point": mathieu_fermi(),
        "mathieu_ground_state_max": float(mathieu_ground_state().max()),
        "sin_divform_Q": harmonic_mean_sin(),
        "sin_divform_corrector_x": x.tolist(),
        "sin_divform_corrector": sin_corrector(x).tolist(),
        "sin_divform_btilde": (-spectral_derivative_sin(x)).tolist(),
        "xi1xi2_kernel_deg2": derivative_2x2_null([0.0, -1.0, 0.0]),
        "drift_lambda_samples": [drift_lambda(v) for v in (-1.0, 0.0, 0.5, 1.0, 2.0, 3.0)],
    }
