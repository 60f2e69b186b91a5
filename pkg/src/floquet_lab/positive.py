"""The positive principal eigenvalue ``Lambda(xi)`` and the level set ``Xi``."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from . import spectral
from .config import DEFAULT_TOL
from .errors import (
    AscentStalled,
    ComplexPrincipalEigenvalue,
    EigSolverFailure,
    HessianNotNegativeDefinite,
    NoPositiveEigenvector,
    PreconditionUnmet,
)
from .operator_model import PeriodicOperator, assemble_shifted

POSITIVITY_FLOOR = 1e-8  # min Re v must exceed this fraction of max |v|
IMAG_FLOOR = 1e-8  # ||Im v|| / ||v|| allowed after the phase fix
SINGLETON, CONVEX, SUBZERO = "Singleton", "ConvexSurface", "SubZero"


def quad_grid(mf):
    """Grid size on which products of two truncated vectors integrate exactly."""
    return 4 * mf + 2


def _positive_vector(vals, vecs, n, mf, what):
    """Index and rescaled vector of the unique eigenpair with a positive eigenfunction."""
    ng = quad_grid(mf)
    origin = (0,) * n
    hits = []
    for j in np.argsort(vals.real, kind="stable"):
        lam = vals[j]
        if abs(lam.imag) > 1e-6 * max(1.0, abs(lam)):
            continue
        g = spectral.vec_to_grid(vecs[:, j], n, mf, ng)
        anchor = g[origin]
        scale = np.abs(g).max()
        if abs(anchor) < 1e-6 * scale:
            continue
        g = g / (anchor / abs(anchor))
        norm = np.linalg.norm(g)
        if np.linalg.norm(g.imag) <= IMAG_FLOOR * norm and g.real.min() > POSITIVITY_FLOOR * scale:
            hits.append((j, vecs[:, j] / (anchor / abs(anchor))))
    if len(hits) != 1:
        raise NoPositiveEigenvector(
            f"{len(hits)} eigenvectors of the {what} pass the positivity test (need exactly 1)"
        )
    j, v = hits[0]
    lam = vals[j]
    if abs(lam.imag) > 1e-9 * max(1.0, abs(lam)):
        raise ComplexPrincipalEigenvalue(f"positive eigenvalue {lam} is not real")
    return j, v


def _eig(matrix):
    try:
        return np.linalg.eig(matrix)
    except np.linalg.LinAlgError as exc:
        raise EigSolverFailure(str(exc)) from exc


@dataclass
class LambdaEval:
    """The positive Bloch pair at ``xi``.

    ``p`` and ``p_star`` are truncated Fourier vectors with ``p(0) = 1`` and
    ``integral of p * p_star = 1``, so ``psi = p * p_star`` is a probability density.
    """

    xi: np.ndarray
    value: float
    p: np.ndarray
    p_star: np.ndarray
    mf: int

    @property
    def n(self):
        return len(self.xi)

    def psi(self, ng=None):
        ng = ng or quad_grid(self.mf)
        return (self.p_grid(ng) * self.p_star_grid(ng)).real

    def p_grid(self, ng=None):
        return spectral.vec_to_grid(self.p, self.n, self.mf, ng or quad_grid(self.mf)).real

    def p_star_grid(self, ng=None):
        return spectral.vec_to_grid(self.p_star, self.n, self.mf, ng or quad_grid(self.mf)).real

    def u(self, points):
        """The Bloch solution ``exp(xi . x) p(x)``."""
        points = np.atleast_2d(points)
        return np.exp(points @ self.xi) * spectral.eval_vec(self.p, self.n, self.mf, points).real

    def u_jet(self, points):
        points = np.atleast_2d(points)
        val, grad, hess = spectral.jet_vec(self.p, self.n, self.mf, points)
        xi = self.xi
        e = np.exp(points @ xi)[:, None]
        g = grad + xi[None, :] * val[:, None]
        h = (hess + xi[None, :, None] * grad[:, None, :] + xi[None, None, :] * grad[:, :, None]
             + np.multiply.outer(val, np.outer(xi, xi)))
        return e[:, 0] * val, e * g, e[:, :, None] * h


def lambda_of_xi(op: PeriodicOperator, xi, mf=None, adjoint=True):
    """``Lambda(xi)`` with its positive eigenfunction and the matching adjoint eigenfunction.

    With ``adjoint=False`` the adjoint solve is skipped and ``p_star`` is ``None``.
    """
    if not op.is_real:
        raise PreconditionUnmet("Lambda(xi) needs an operator with real coefficients")
    n = op.n
    mf = op.default_mf if mf is None else mf
    xi = np.asarray(xi, dtype=float).reshape(n)
    vals, vecs = _eig(assemble_shifted(op, -1j * xi, mf).matrix)
    j, p = _positive_vector(vals, vecs, n, mf, "conjugated operator")
    lam = float(vals[j].real)
    p = p / spectral.eval_vec(p, n, mf, np.zeros((1, n)))[0]
    if not adjoint:
        return LambdaEval(xi=xi, value=lam, p=p, p_star=None, mf=mf)
    svals, svecs = _eig(assemble_shifted(op, 1j * xi, mf, adjoint=True).matrix)
    js, p_star = _positive_vector(svals, svecs, n, mf, "adjoint conjugated operator")
    if abs(svals[js] - lam) > 1e-8 * max(1.0, abs(lam)):
        raise NoPositiveEigenvector(
            f"adjoint principal eigenvalue {svals[js].real:.12g} differs from {lam:.12g}"
        )
    p_star = p_star / _inner(p, p_star, n, mf)
    return LambdaEval(xi=xi, value=lam, p=p, p_star=p_star, mf=mf)


def _inner(f, g, n, mf):
    """``integral of f * g`` over the cell for truncated Fourier vectors."""
    width = 2 * mf + 1
    g_rev = np.reshape(g, (width,) * n)[(slice(None, None, -1),) * n].reshape(-1)
    return complex(np.dot(f, g_rev))


class LambdaFunction:
    """Cached evaluations of ``Lambda`` with finite-difference derivatives."""

    def __init__(self, op, mf=None, h=1e-4):
        self.op = op
        self.mf = op.default_mf if mf is None else mf
        self.h = h
        self._cache = {}
        self._values = {}

    @property
    def n(self):
        return self.op.n

    def _key(self, xi):
        xi = np.asarray(xi, dtype=float).reshape(self.n)
        return xi, tuple(np.round(xi, 14))

    def eval(self, xi):
        """Full Bloch pair (with the adjoint eigenfunction) at ``xi``."""
        xi, key = self._key(xi)
        if key not in self._cache:
            self._cache[key] = lambda_of_xi(self.op, xi, self.mf)
            self._values[key] = self._cache[key].value
        return self._cache[key]

    def __call__(self, xi):
        xi, key = self._key(xi)
        if key not in self._values:
            self._values[key] = lambda_of_xi(self.op, xi, self.mf, adjoint=False).value
        return self._values[key]

    def _grad(self, xi, h):
        e = np.eye(self.n)
        return np.array([(self(xi + h * e[i]) - self(xi - h * e[i])) / (2 * h)
                         for i in range(self.n)])

    def _hess(self, xi, h):
        n = self.n
        e = np.eye(n)
        f0 = self(xi)
        H = np.empty((n, n))
        for i in range(n):
            H[i, i] = (self(xi + h * e[i]) - 2 * f0 + self(xi - h * e[i])) / h**2
            for j in range(i):
                H[i, j] = H[j, i] = (
                    self(xi + h * (e[i] + e[j])) - self(xi + h * (e[i] - e[j]))
                    - self(xi - h * (e[i] - e[j])) + self(xi - h * (e[i] + e[j]))
                ) / (4 * h**2)
        return H

    def gradient(self, xi, richardson=True):
        xi = np.asarray(xi, dtype=float)
        g = self._grad(xi, self.h)
        if richardson:
            g = (4 * g - self._grad(xi, 2 * self.h)) / 3
        return g

    def hessian(self, xi, richardson=True):
        """Finite-difference Hessian; ``h`` is raised to ``1e-3`` so eigenvalue noise stays small."""
        xi = np.asarray(xi, dtype=float)
        h = max(self.h, 1e-3)
        H = self._hess(xi, h)
        if richardson:
            H = (4 * H - self._hess(xi, 2 * h)) / 3
        return 0.5 * (H + H.T)


def check_negative_definite(H, tol=DEFAULT_TOL):
    top = float(np.linalg.eigvalsh(H).max())
    if top >= -tol.hess:
        raise HessianNotNegativeDefinite(f"Hessian of Lambda has eigenvalue {top:.3e}")
    return top


def ray_directions(n, count=None):
    if n == 1:
        return np.array([[1.0], [-1.0]])
    if n == 2:
        count = count or 64
        t = 2 * np.pi * np.arange(count) / count
        return np.stack([np.cos(t), np.sin(t)], axis=1)
    if count is None:
        dirs = [d for d in itertools.product((-1, 0, 1), repeat=n) if any(d)]
        dirs = np.array(dirs, dtype=float)
    else:
        golden = math.pi * (3 - math.sqrt(5))
        i = np.arange(count) + 0.5
        z = 1 - 2 * i / count
        r = np.sqrt(1 - z**2)
        dirs = np.stack([r * np.cos(golden * i), r * np.sin(golden * i), z], axis=1)
    return dirs / np.linalg.norm(dirs, axis=1, keepdims=True)


@dataclass
class XiLevelSet:
    lambda0: float
    xi_star: np.ndarray
    classification: str
    samples: np.ndarray  # points of Xi, shape (count, n)
    directions: np.ndarray  # ray direction for each sample
    hessian: np.ndarray  # FD Hessian at xi_star
    iterations: int
    convex: bool | None = None
    extra: dict = field(default_factory=dict)

    def h(self, omega):
        """Support function of the sample hull, ``max_i omega . xi_i``."""
        omega = np.atleast_2d(omega)
        if len(self.samples) == 0:
            return np.full(len(omega), -np.inf)
        return (omega @ self.samples.T).max(axis=1)


def maximize_lambda(op, mf=None, tol=DEFAULT_TOL, directions=None, max_iter=60,
                    check_convexity=True, lam=None):
    """Newton ascent for ``Lambda_0 = max Lambda`` followed by ray tracing of ``Xi``."""
    lam = lam or LambdaFunction(op, mf)
    n = op.n
    xi = np.zeros(n)
    f = lam(xi)
    g = lam.gradient(xi, richardson=False)
    it = 0
    stalls = 0
    for it in range(1, max_iter + 1):
        if np.linalg.norm(g) <= 1e-10:
            break
        H = lam.hessian(xi, richardson=False)
        check_negative_definite(H, tol)
        step = -np.linalg.solve(H, g)
        # gradient noise from eigenvalue rounding limits the attainable step size
        if np.linalg.norm(step) <= 1e-7 * max(1.0, np.linalg.norm(xi)):
            break
        t = 1.0
        while t > 1e-6:
            trial = xi + t * step
            ft = lam(trial)
            if ft >= f - 1e-14 * max(1.0, abs(f)):
                break
            t *= 0.5
        else:
            if np.linalg.norm(step) <= 1e-6:
                break
            raise AscentStalled("line search failed", best=(xi, f))
        stalls = stalls + 1 if ft <= f + 1e-15 * max(1.0, abs(f)) else 0
        xi, f = trial, ft
        g = lam.gradient(xi, richardson=False)
        if stalls >= 8:
            raise AscentStalled(f"no progress, gradient norm {np.linalg.norm(g):.3e}", best=(xi, f))
    else:
        raise AscentStalled(f"no convergence in {max_iter} steps", best=(xi, f))
    H = lam.hessian(xi)
    check_negative_definite(H, tol)

    if abs(f) <= tol.level:
        return XiLevelSet(lambda0=f, xi_star=xi, classification=SINGLETON,
                          samples=xi[None, :].copy(), directions=np.zeros((1, n)), hessian=H,
                          iterations=it, convex=True)
    if f < 0:
        return XiLevelSet(lambda0=f, xi_star=xi, classification=SUBZERO, samples=np.zeros((0, n)),
                          directions=np.zeros((0, n)), hessian=H, iterations=it)

    dirs = ray_directions(n) if directions is None else np.asarray(directions, dtype=float)
    samples = []
    for w in dirs:
        phi = lambda t: lam(xi + t * w)
        hi = max(1.0, math.sqrt(2 * f / max(1e-12, -np.linalg.eigvalsh(H).max())))
        while phi(hi) > 0:
            hi *= 2
            if hi > 1e6:
                raise AscentStalled("ray never leaves the region Lambda > 0", best=(xi, f))
        t = brentq(phi, 0.0, hi, xtol=1e-13, rtol=4 * np.finfo(float).eps, maxiter=200)
        samples.append(xi + t * w)
    samples = np.array(samples)
    level = XiLevelSet(lambda0=f, xi_star=xi, classification=CONVEX, samples=samples,
                       directions=dirs, hessian=H, iterations=it)
    if check_convexity:
        level.convex = strictly_convex(lam, samples)
    return level


def strictly_convex(lam, samples, h=1e-5):
    """Each sampled support hyperplane (normal ``-grad Lambda``) touches the samples only once."""
    if len(samples) < 2:
        return True
    n = samples.shape[1]
    e = np.eye(n)
    for i, s in enumerate(samples):
        grad = np.array([(lam(s + h * e[d]) - lam(s - h * e[d])) / (2 * h) for d in range(n)])
        normal = -grad / np.linalg.norm(grad)
        others = np.delete(samples, i, axis=0)
        if np.any((others - s) @ normal >= -1e-12):
            return False
    return True


def b_average(op, mf=None):
    """``integral of b psi`` for an operator with ``c = 0``, ``psi`` its adjoint ground state."""
    if not op.c_is_zero:
        raise PreconditionUnmet("the drift-average criterion needs c = 0")
    ev = lambda_of_xi(op, np.zeros(op.n), mf)
    return drift_integral(op, ev, np.zeros(op.n))


def drift_integral(op, ev, xi):
    """``integral of (b - 2 a (xi + grad p / p)) psi`` with ``psi = p p_star``."""
    n, mf = op.n, ev.mf
    ng = max(quad_grid(mf), op.resolution)
    a = np.stack([[spectral.resample(op.a[i, j], ng) for j in range(n)] for i in range(n)]).real
    b = np.stack([spectral.resample(op.b[i], ng) for i in range(n)]).real
    p = ev.p_grid(ng)
    ps = ev.p_star_grid(ng)
    grad_p = [spectral.vec_to_grid(spectral.derivative_vec(ev.p, n, mf, d), n, mf, ng).real
              for d in range(n)]
    out = np.empty(n)
    for i in range(n):
        integrand = (b[i] - 2 * sum(a[i, j] * xi[j] for j in range(n))) * p * ps
        integrand = integrand - 2 * sum(a[i, j] * grad_p[j] for j in range(n)) * ps
        out[i] = integrand.mean()
    return out


def conjugated_drift(op, ev, resolution=None):
    """Grid samples of ``b - 2 a (xi + grad p / p)``, the drift of ``u^-1 L u``."""
    n, mf = op.n, ev.mf
    ng = resolution or max(op.resolution, quad_grid(mf))
    a = np.stack([[spectral.resample(op.a[i, j], ng) for j in range(n)] for i in range(n)]).real
    b = np.stack([spectral.resample(op.b[i], ng) for i in range(n)]).real
    p = ev.p_grid(ng)
    log_grad = [spectral.vec_to_grid(spectral.derivative_vec(ev.p, n, mf, d), n, mf, ng).real / p
                for d in range(n)]
    return np.stack([b[i] - 2 * sum(a[i, j] * (ev.xi[j] + log_grad[j]) for j in range(n))
                     for i in range(n)]), a


def conjugate_by_bloch(op, ev, resolution=None):
    """The operator ``u^-1 (L - Lambda(xi)) u`` with ``u = exp(xi . x) p``; it annihilates 1."""
    from .operator_model import general

    b_t, a = conjugated_drift(op, ev, resolution)
    out = general(a=a, b=b_t, c=0.0, n=op.n, resolution=b_t.shape[-1],
                  label=f"{op.label}~" if op.label else "")
    out.meta.update({k: v for k, v in op.meta.items() if k == "mf"})
    return out


def lambda0_criteria(op, mf=None, tol=DEFAULT_TOL, level=None):
    """Numeric criteria for the sign of ``Lambda_0`` and their agreement with the ascent."""
    lam = LambdaFunction(op, mf)
    level = level or maximize_lambda(op, mf, tol, check_convexity=False, lam=lam)
    c_min = float(op.c.real.min())
    report = {
        "lambda0": level.lambda0,
        "xi_star": level.xi_star.tolist(),
        "classification": level.classification,
        "c_nonneg": c_min >= -1e-12,
        "implies_lambda0_nonneg": c_min >= -1e-12,
        "b_avg": None,
        "gamma": None,
        "gamma_xi": None,
    }
    zero = abs(level.lambda0) <= 1e-6
    consistent = True
    if report["c_nonneg"] and level.lambda0 < -1e-6:
        consistent = False
    if op.c_is_zero:
        ev0 = lam.eval(np.zeros(op.n))
        alpha = drift_integral(op, ev0, np.zeros(op.n))
        report["b_avg"] = alpha.tolist()
        consistent &= (np.abs(alpha).max() <= 1e-7) == zero
    if level.classification != SUBZERO:
        xi = level.xi_star if level.classification == SINGLETON else level.samples[0]
        ev = lam.eval(xi)
        if abs(ev.value) > 10 * tol.level:
            raise PreconditionUnmet(f"sample {xi} is not on the zero level set")
        gamma = drift_integral(op, ev, xi)
        report["gamma"] = gamma.tolist()
        report["gamma_xi"] = xi.tolist()
        consistent &= (np.abs(gamma).max() <= 1e-7) == zero
    report["consistent"] = bool(consistent)
    return report
