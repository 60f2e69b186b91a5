"""Band functions, real Fermi points and Taylor expansions of a simple band."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import linear_sum_assignment, minimize, minimize_scalar

from .config import DEFAULT_TOL
from .errors import (
    BranchTrackingAmbiguous,
    EigSolverFailure,
    MultiplicityAboveOne,
    NoisyExpansion,
    NonIsolatedZeroSet,
)
from .operator_model import assemble_shifted
from .polyalgebra import GradedPolynomial, monomials

# Default truncation of the coarse Fermi scan, by dimension.
SCAN_MF = {1: 16, 2: 5, 3: 3}
SCAN_POINTS = {1: 256, 2: 32, 3: 12}
MAX_ISOLATED_POINTS = 32
_CURVE_NOTE = "heuristic: zero set not isolated (surrounding sphere meets zeros or too many points)"


def _eig(matrix, vectors=True):
    try:
        if vectors:
            return np.linalg.eig(matrix)
        return np.linalg.eigvals(matrix)
    except np.linalg.LinAlgError as exc:
        raise EigSolverFailure(str(exc)) from exc


def spectrum(op, k, mf=None, adjoint=False):
    """Eigenvalues of the shifted matrix sorted by real part."""
    vals = _eig(assemble_shifted(op, k, mf, adjoint).matrix, vectors=False)
    return vals[np.lexsort((vals.imag, vals.real))]


def brillouin_grid(n, points):
    """Uniform grid of ``[-pi, pi]^n`` in boustrophedon order (neighbours stay adjacent)."""
    axis = np.linspace(-np.pi, np.pi, points)
    if n == 1:
        return axis[:, None]
    rows = []
    for idx, head in enumerate(itertools.product(range(points), repeat=n - 1)):
        tail = axis if idx % 2 == 0 else axis[::-1]
        for t in tail:
            rows.append([axis[h] for h in head] + [t])
    return np.array(rows)


@dataclass
class BandStructure:
    k_grid: np.ndarray
    bands: np.ndarray  # (points, J) complex, branch-tracked
    operator: str
    mf: int
    min_overlap: float

    @property
    def branch_count(self):
        return self.bands.shape[1]

    def sorted_bands(self):
        """Band functions ordered by real part at every point (``lambda_1 <= lambda_2 <= ...``)."""
        b = self.bands
        order = np.argsort(b.real, axis=1, kind="stable")
        return np.take_along_axis(b, order, axis=1)


def compute_bands(op, k_grid, J, mf=None):
    """Lowest ``J`` bands along ``k_grid``, tracked by eigenvector overlap.

    ``k_grid`` is an array of shape ``(points, n)`` (or ``(points,)`` for
    ``n = 1``) or an integer number of points per axis for a boustrophedon grid.
    """
    mf = op.default_mf if mf is None else mf
    if isinstance(k_grid, (int, np.integer)):
        k_grid = brillouin_grid(op.n, int(k_grid))
    k_grid = np.asarray(k_grid, dtype=float).reshape(-1, op.n)
    size = (2 * mf + 1) ** op.n
    if J > size // 4:
        raise ValueError(f"J={J} exceeds a quarter of the basis size {size}")
    pool = min(size, 2 * J + 4)

    def lowest(k, pool=pool):
        vals, vecs = _eig(assemble_shifted(op, k, mf).matrix)
        order = np.lexsort((vals.imag, vals.real))
        cut = pool
        while cut < len(order) and (abs(vals[order[cut]] - vals[order[cut - 1]])
                                    <= 1e-8 * max(1.0, abs(vals[order[cut]]))):
            cut += 1  # keep degenerate clusters whole
        order = order[:cut]
        v = vecs[:, order]
        return vals[order], v / np.linalg.norm(v, axis=0)

    def clusters(vals):
        """Groups of (numerically) equal eigenvalues; tracking works on their spans."""
        groups, start = [], 0
        for i in range(1, len(vals) + 1):
            if i == len(vals) or abs(vals[i] - vals[i - 1]) > 1e-8 * max(1.0, abs(vals[i])):
                groups.append(list(range(start, i)))
                start = i
        return groups

    vals, vecs = lowest(k_grid[0])
    bands = np.empty((len(k_grid), J), dtype=np.complex128)
    bands[0] = vals[:J]
    prev = vecs[:, :J]
    worst = 1.0
    def match(vals, vecs):
        overlap = np.empty((J, len(vals)))
        bases = {}
        for g in clusters(vals):
            basis, _ = np.linalg.qr(vecs[:, g])
            proj = np.linalg.norm(basis.conj().T @ prev, axis=0)
            for i in g:
                bases[i] = basis
                overlap[:, i] = proj
        rows, cols = linear_sum_assignment(-overlap)
        return rows, cols, overlap[rows, cols], bases

    for t in range(1, len(k_grid)):
        vals, vecs = lowest(k_grid[t])
        rows, cols, chosen, bases = match(vals, vecs)
        if chosen.min() < 0.5 and pool < size:
            # a tracked branch may have left the pool; retry with the full spectrum
            vals, vecs = lowest(k_grid[t], size)
            rows, cols, chosen, bases = match(vals, vecs)
        worst = min(worst, float(chosen.min()))
        if chosen.min() < 0.5:
            raise BranchTrackingAmbiguous(
                f"overlap {chosen.min():.3f} between grid points {t - 1} and {t}; refine the grid"
            )
        bands[t, rows] = vals[cols]
        new = np.empty_like(prev)
        for r, c in zip(rows, cols):
            basis = bases[c]
            if basis.shape[1] == 1:
                new[:, r] = vecs[:, c]
            else:
                w = basis @ (basis.conj().T @ prev[:, r])
                new[:, r] = w / np.linalg.norm(w)
        prev = new
    return BandStructure(k_grid=k_grid, bands=bands, operator=op.label, mf=mf, min_overlap=worst)


def hausdorff(a, b):
    a = np.asarray(a)[:, None]
    b = np.asarray(b)[None, :]
    d = np.abs(a - b)
    return float(max(d.min(axis=1).max(), d.min(axis=0).max()))


def duality_check(op, k_sample, mf=None):
    """Largest Hausdorff distance between spec ``L^t(x, D+k)`` and spec ``L(x, D-k)``."""
    worst = 0.0
    for k in np.atleast_2d(np.asarray(k_sample, dtype=np.complex128).reshape(-1, op.n)):
        dual = spectrum(op, k, mf, adjoint=True)
        direct = spectrum(op, -k, mf)
        worst = max(worst, hausdorff(dual, direct))
    return {"max_distance": worst, "samples": len(np.atleast_2d(k_sample))}


@dataclass
class FermiPointSet:
    points: list
    multiplicities: list
    level: float
    infinite: bool = False
    heuristic: str = ""
    residuals: list = field(default_factory=list)

    def __len__(self):
        return len(self.points)

    @property
    def empty(self):
        return not self.infinite and not self.points


def _sigma_min(op, k, mf, level):
    mat = assemble_shifted(op, np.asarray(k, dtype=float), mf).matrix
    if level:
        mat = mat - level * np.eye(mat.shape[0])
    return np.linalg.svd(mat, compute_uv=False)


def _scan_merit(op, grid, mf, level):
    return np.array([np.abs(spectrum(op, k, mf) - level).min() for k in grid])


def _local_minima(merit, shape):
    """Flat indices of local minima on a periodic grid whose depth admits a nearby zero."""
    m = merit.reshape(shape)
    n = m.ndim
    is_min = np.ones(m.shape, dtype=bool)
    spread = np.zeros(m.shape)
    for offs in itertools.product((-1, 0, 1), repeat=n):
        if not any(offs):
            continue
        nb = np.roll(m, shift=offs, axis=tuple(range(n)))
        is_min &= m <= nb
        spread = np.maximum(spread, np.abs(nb - m))
    candidate = is_min & (m <= 2.0 * spread + 1e-12)
    return np.flatnonzero(candidate)


def real_fermi_points(op, level=0.0, mf=None, tol=DEFAULT_TOL, scan_points=None, scan_mf=None):
    """Real quasimomenta ``k`` in the Brillouin zone with ``level`` in spec ``L(x, D+k)``.

    A coarse scan of ``min_j |lambda_j(k) - level|`` over a uniform periodic grid
    seeds local refinement of the smallest singular value of ``L(x, D+k) - level``.
    Returns ``infinite=True`` when the zero set looks like a curve or surface
    (a heuristic: a zero whose small surrounding sphere also meets the zero set,
    or more than ``MAX_ISOLATED_POINTS`` distinct zeros).
    """
    n = op.n
    mf = op.default_mf if mf is None else mf
    pts = scan_points or SCAN_POINTS[n]
    smf = min(mf, scan_mf or SCAN_MF[n])
    axis = np.linspace(-np.pi, np.pi, pts, endpoint=False)
    grid = np.array(list(itertools.product(axis, repeat=n)))
    merit = _scan_merit(op, grid, smf, level)
    seeds = grid[_local_minima(merit, (pts,) * n)]
    step = 2 * np.pi / pts
    lattice = op.lattice

    found = []
    for seed in seeds:
        f = lambda k: _sigma_min(op, k, mf, level)[-1]
        if n == 1:
            res = minimize_scalar(lambda t: f([t]), bounds=(seed[0] - step, seed[0] + step),
                                  method="bounded", options={"xatol": 1e-13, "maxiter": 500})
            k_opt, val = np.array([res.x]), float(res.fun)
        else:
            simplex = np.vstack([seed] + [seed + step * e for e in np.eye(n)])
            res = minimize(f, seed, method="Nelder-Mead",
                           options={"initial_simplex": simplex, "xatol": 1e-12, "fatol": 1e-18,
                                    "maxiter": 4000, "maxfev": 8000})
            k_opt, val = np.asarray(res.x), float(res.fun)
        if val <= tol.fermi:
            k_opt = _polish_critical(op, k_opt, mf, level, tol)
            found.append((lattice.wrap(k_opt), _sigma_min(op, k_opt, mf, level)[-1]))
            if n >= 2 and len(found) == 1 and _meets_sphere(op, k_opt, mf, level, tol):
                return FermiPointSet(points=[found[0][0]], multiplicities=[], level=level,
                                     infinite=True, heuristic=_CURVE_NOTE,
                                     residuals=[found[0][1]])

    points, residuals = [], []
    for k, val in sorted(found, key=lambda t: t[1]):
        if all(lattice.distance(k, p) > tol.merge_radius for p in points):
            points.append(k)
            residuals.append(val)

    infinite = len(points) > MAX_ISOLATED_POINTS
    if n >= 2 and points and not infinite:
        infinite = any(_meets_sphere(op, p, mf, level, tol) for p in points[:MAX_ISOLATED_POINTS])
    if infinite:
        return FermiPointSet(points=points, multiplicities=[], level=level, infinite=True,
                             heuristic=_CURVE_NOTE, residuals=residuals)
    mults = [int(np.sum(_sigma_min(op, p, mf, level) <= tol.fermi)) for p in points]
    return FermiPointSet(points=points, multiplicities=mults, level=level, residuals=residuals)


def _polish_critical(op, k, mf, level, tol, h=1e-4):
    """Move a zero sitting at a band extremum onto the critical point.

    Near a degenerate zero the singular value is quadratic in ``k - k*``, so the
    minimizer is only accurate to the square root of rounding; Newton steps on
    the finite-difference gradient of the eigenvalue recover ``k*`` itself.
    """
    n = op.n
    e = np.eye(n)

    def lam(q):
        vals = spectrum(op, q, mf)
        return vals[int(np.argmin(np.abs(vals - level)))]

    for _ in range(3):
        f0 = lam(k)
        grad = np.array([(lam(k + h * e[i]) - lam(k - h * e[i])) / (2 * h) for i in range(n)])
        if np.abs(grad).max() > 1e-3:
            return k
        H = np.empty((n, n), dtype=np.complex128)
        for i in range(n):
            H[i, i] = (lam(k + h * e[i]) - 2 * f0 + lam(k - h * e[i])) / h**2
            for j in range(i):
                H[i, j] = H[j, i] = (lam(k + h * (e[i] + e[j])) - lam(k + h * (e[i] - e[j]))
                                     - lam(k - h * (e[i] - e[j])) + lam(k - h * (e[i] + e[j]))) / (4 * h * h)
        try:
            step = -np.linalg.solve(H, grad).real
        except np.linalg.LinAlgError:
            return k
        if np.linalg.norm(step) > 1e-3:
            return k
        trial = k + step
        if _sigma_min(op, trial, mf, level)[-1] > tol.fermi:
            return k
        k = trial
        if np.linalg.norm(step) < 1e-12:
            break
    return k


def _meets_sphere(op, center, mf, level, tol, radius=0.05):
    n = op.n
    f = lambda d: _sigma_min(op, center + radius * d / np.linalg.norm(d), mf, level)[-1]
    if n == 2:
        angles = np.linspace(0, 2 * np.pi, 64, endpoint=False)
        vals = [f(np.array([math.cos(a), math.sin(a)])) for a in angles]
        a0 = angles[int(np.argmin(vals))]
        res = minimize_scalar(lambda a: f(np.array([math.cos(a), math.sin(a)])),
                              bounds=(a0 - 0.1, a0 + 0.1), method="bounded",
                              options={"xatol": 1e-12})
        best = float(res.fun)
    else:
        rng = np.random.default_rng(0)
        dirs = rng.normal(size=(200, n))
        vals = [f(d) for d in dirs]
        d0 = dirs[int(np.argmin(vals))]
        res = minimize(f, d0, method="Nelder-Mead", options={"xatol": 1e-10, "fatol": 1e-16})
        best = float(res.fun)
    return best <= 10 * tol.fermi


def check_isolated(fermi):
    if fermi.infinite:
        raise NonIsolatedZeroSet(fermi.heuristic)
    return fermi


# Central difference weights on offsets (-2, -1, 0, 1, 2); each has O(h^2) error.
_STENCILS = {
    0: np.array([0.0, 0.0, 1.0, 0.0, 0.0]),
    1: np.array([0.0, -0.5, 0.0, 0.5, 0.0]),
    2: np.array([0.0, 1.0, -2.0, 1.0, 0.0]),
    3: np.array([-0.5, 1.0, 0.0, -1.0, 0.5]),
    4: np.array([1.0, -4.0, 6.0, -4.0, 1.0]),
}


@dataclass
class BandTaylor:
    base_point: np.ndarray
    terms: list  # GradedPolynomial lambda_l(k - k0), l = 0..max_order
    errors: list  # Richardson error estimate per order
    l0: int
    trust_radius: float
    value: complex  # the eigenvalue at the base point
    gap: float

    @property
    def leading(self):
        return self.terms[self.l0]

    @property
    def max_order(self):
        return len(self.terms) - 1

    def __call__(self, dk):
        dk = np.atleast_2d(dk)
        return sum(t(dk) for t in self.terms)


def band_taylor(op, k0, max_order=4, target=0.0, mf=None, h=0.02, tol=DEFAULT_TOL):
    """Homogeneous Taylor terms of the simple band through ``target`` at ``k0``.

    Tensor central differences on a 5^n stencil at steps ``h`` and ``h/2`` are
    combined by Richardson extrapolation.  Terms describe ``lambda(k) - target``.
    """
    if max_order > 4:
        raise ValueError("max_order above 4 is not supported by the 5-point stencils")
    n = op.n
    mf = op.default_mf if mf is None else mf
    k0 = np.asarray(k0, dtype=float).reshape(n)
    vals0 = spectrum(op, k0, mf)
    j = int(np.argmin(np.abs(vals0 - target)))
    lam0 = vals0[j]
    others = np.delete(vals0, j)
    gap = float(np.abs(others - lam0).min()) if others.size else math.inf
    if gap <= tol.gap:
        raise MultiplicityAboveOne(f"eigenvalue at k0 has gap {gap:.2e} <= {tol.gap:.0e}")

    def track(k):
        vals = spectrum(op, k, mf)
        d = np.abs(vals - lam0)
        i = int(np.argmin(d))
        if np.partition(d, 1)[1] < 0.5 * gap if d.size > 1 else False:
            raise NoisyExpansion("stencil point lost the simple eigenvalue; lower h")
        return vals[i]

    def table(step):
        offs = np.arange(-2, 3)
        out = np.empty((5,) * n, dtype=np.complex128)
        for idx in itertools.product(range(5), repeat=n):
            out[idx] = track(k0 + step * offs[list(idx)])
        return out

    tables = {step: table(step) for step in (h, h / 2)}

    def derivative(alpha, step):
        w = tables[step]
        for axis, order in enumerate(alpha):
            w = np.tensordot(_STENCILS[order], w, axes=([0], [0])) / step**order
        return complex(w)

    terms, errors = [], []
    for l in range(max_order + 1):
        coeffs, err = {}, 0.0
        for alpha in monomials(n, l):
            coarse = derivative(alpha, h)
            fine = derivative(alpha, h / 2)
            rich = (4 * fine - coarse) / 3
            fact = math.prod(math.factorial(a) for a in alpha)
            if l == 0:
                rich = fine = lam0 - target
            coeffs[alpha] = rich / fact
            err = max(err, abs(rich - fine) / fact)
        terms.append(GradedPolynomial(n, coeffs))
        errors.append(err)

    norms = [t.norm() for t in terms]
    l0 = next((l for l, v in enumerate(norms) if v > tol.taylor_zero), None)
    if l0 is None:
        raise NoisyExpansion(f"all Taylor terms up to order {max_order} vanish")
    if any(errors[l] > tol.taylor_zero for l in range(l0)) or errors[l0] > 1e-2 * norms[l0]:
        raise NoisyExpansion(f"Richardson error estimates {errors} too large for order {l0}")
    ratios = [(norms[l0] / norms[l]) ** (1.0 / (l - l0))
              for l in range(l0 + 1, max_order + 1) if norms[l] > tol.taylor_zero]
    trust = 0.5 * min(ratios) if ratios else math.pi
    trust = min(trust, 0.25 * gap ** 0.5, math.pi)
    terms = [t.chop(1e-300) for t in terms]
    return BandTaylor(base_point=k0, terms=terms, errors=errors, l0=l0, trust_radius=trust,
                      value=complex(lam0), gap=gap)


def band_minimum(op, branch=0, points=129, mf=None, h=1e-3):
    """Global minimum of a sorted band over the Brillouin zone (``n = 1``).

    Returns the minimizer, the value, the second derivative there, the
    minimum gap to the next band over the scan, and all grid minima within
    ``1e-9`` of the global one (a unique minimum gives a single entry).
    """
    if op.n != 1:
        raise ValueError("band_minimum is implemented for one dimension")
    mf = op.default_mf if mf is None else mf
    grid = np.linspace(-np.pi, np.pi, points)
    vals = np.array([spectrum(op, [k], mf).real for k in grid])
    band = vals[:, branch]
    lam = lambda k: spectrum(op, [k], mf).real[branch]
    i = int(np.argmin(band))
    lo, hi = grid[max(i - 1, 0)], grid[min(i + 1, points - 1)]
    res = minimize_scalar(lam, bounds=(lo, hi), method="bounded", options={"xatol": 1e-10})
    k_min = float(res.x)
    second = (lam(k_min + h) - 2 * lam(k_min) + lam(k_min - h)) / h**2
    interior = grid[1:-1]
    near = [float(k) for k, v in zip(grid, band) if v - band.min() <= 1e-9]
    local = [float(interior[j]) for j in range(len(interior))
             if band[j + 1] <= band[j] and band[j + 1] <= band[j + 2]]
    return {
        "k_min": k_min,
        "value": float(res.fun),
        "second_derivative": float(second),
        "gap": float((vals[:, branch + 1] - band).min()),
        "grid_minima": local,
        "near_minimum": near,
    }
