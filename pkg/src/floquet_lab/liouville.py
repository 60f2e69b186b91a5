"""Dimension counts of polynomially growing solutions, synthesis on Xi, Floquet transform."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

from .bands import FermiPointSet, band_taylor, real_fermi_points
from .cell import independent_traceless, linear_growth_basis, patch_points, quadratic_solution
from .config import DEFAULT_TOL
from .errors import (
    EmptyMeasure,
    FloquetLabError,
    InconsistencyDetected,
    MultiplicityAboveOne,
    NoisyExpansion,
    SupportTooLarge,
    XiNotOnLevelSet,
)
from .polyalgebra import h_dim, q_dim, qharmonic_dim
from .positive import SUBZERO, LambdaFunction, maximize_lambda

VACUOUS, FINITE, INFINITE = "Vacuous", "Finite", "Infinite"


@dataclass
class LiouvilleReport:
    Z: FermiPointSet
    per_point: list
    d: list  # d_N as int, or [lower, upper] when some point is not simple
    classification: str
    N_max: int

    @property
    def exact(self):
        return all(isinstance(v, int) for v in self.d)

    def to_dict(self):
        return {
            "classification": self.classification,
            "Z": [np.asarray(p).tolist() for p in self.Z.points],
            "multiplicities": list(self.Z.multiplicities),
            "infinite_heuristic": self.Z.heuristic or None,
            "per_point": [
                {k: v for k, v in item.items() if k != "taylor"} for item in self.per_point
            ],
            "d": self.d,
            "exact": self.exact,
            "N_max": self.N_max,
        }


def _point_dims(op, q, mult, N_max, level, mf, tol):
    n = op.n
    item = {"q": np.asarray(q).tolist(), "multiplicity": int(mult), "taylor": None}
    if mult == 1:
        try:
            taylor = band_taylor(op, q, max_order=4, target=level, mf=mf, tol=tol)
        except (MultiplicityAboveOne, NoisyExpansion) as exc:
            item["marker"] = type(exc).__name__
        else:
            lead = taylor.leading.chop(tol.taylor_zero)
            item.update(
                taylor=taylor,
                l0=taylor.l0,
                leading=lead.to_json(),
                dims=[qharmonic_dim(lead, n, N) for N in range(N_max + 1)],
            )
            return item
    else:
        item["marker"] = "MultiplicityAboveOne"
    # simple-point formula unavailable: crude bound a_q q_{n,N}, at least the Bloch solution
    item["bounds"] = [[1, int(mult) * q_dim(n, N)] for N in range(N_max + 1)]
    return item


def liouville_dimensions(op, N_max=2, level=0.0, mf=None, tol=DEFAULT_TOL, fermi=None):
    """``d_N`` for ``N = 0..N_max``: the sum over real Fermi points of per-point dimensions."""
    fermi = fermi or real_fermi_points(op, level, mf, tol)
    if fermi.infinite:
        return LiouvilleReport(Z=fermi, per_point=[], d=[None] * (N_max + 1),
                               classification=INFINITE, N_max=N_max)
    if fermi.empty:
        return LiouvilleReport(Z=fermi, per_point=[], d=[0] * (N_max + 1),
                               classification=VACUOUS, N_max=N_max)
    items = [_point_dims(op, q, m, N_max, level, mf, tol)
             for q, m in zip(fermi.points, fermi.multiplicities)]
    d = []
    for N in range(N_max + 1):
        lo = hi = 0
        for it in items:
            if "dims" in it:
                lo += it["dims"][N]
                hi += it["dims"][N]
            else:
                lo += it["bounds"][N][0]
                hi += it["bounds"][N][1]
        d.append(lo if lo == hi and all("dims" in it for it in items) else [lo, hi])
    return LiouvilleReport(Z=fermi, per_point=items, d=d, classification=FINITE, N_max=N_max)


def cross_check_dimensions(op, report: LiouvilleReport, cell=None, tol=DEFAULT_TOL):
    """Agreement of the Fermi-point count with constructed solutions and closed forms."""
    n = op.n
    rows = {}
    if report.classification == VACUOUS:
        rows["N=1"] = {"report": report.d[1] if report.N_max >= 1 else 0,
                       "constructed": 0, "formula": 0}
    else:
        if cell is None:
            raise ValueError("a cell solution is needed unless the report is vacuous")
        basis = linear_growth_basis(op, cell, tol)
        rank = _span_dimension(basis)
        rows["N=1"] = {"report": report.d[1], "constructed": rank,
                       "formula": n + 1 if cell.balanced else n}
        if cell.balanced and report.N_max >= 2:
            quads = [quadratic_solution(op, cell, C, tol) for C in independent_traceless(cell.Q)]
            bad = [s.residual() for s in quads if s.residual() > tol.residual]
            if bad:
                raise InconsistencyDetected("quadratic solution residual too large",
                                            diff={"residuals": bad})
            rows["N=2"] = {"report": report.d[2], "constructed": rank + len(quads),
                           "formula": h_dim(n, 2)}
    diff = {k: v for k, v in rows.items() if len({_key(x) for x in v.values()}) != 1}
    if diff:
        raise InconsistencyDetected(f"dimension counts disagree: {diff}", diff=diff)
    return {"agree": True, "rows": rows}


def _key(v):
    return tuple(v) if isinstance(v, list) else v


def _span_dimension(solutions, tol=1e-8):
    """Number of linearly independent functions, judged on patch samples."""
    if not solutions:
        return 0
    pts = patch_points(solutions[0].n, 5)
    mat = np.array([s(pts) for s in solutions])
    sv = np.linalg.svd(mat, compute_uv=False)
    return int(np.sum(sv > tol * sv[0]))


# ---------------------------------------------------------------- synthesis on Xi

EPSILONS = (0.05, 0.1, 0.2)
RADII = (2, 5, 10)


@dataclass
class DiscreteMeasureSynthesis:
    points: np.ndarray
    weights: np.ndarray
    evals: list
    level: object  # XiLevelSet providing h
    residual: float = float("nan")
    certificate: dict = field(default_factory=dict)

    @property
    def n(self):
        return self.points.shape[1]

    def jet(self, points):
        points = np.atleast_2d(points)
        val = 0
        grad = 0
        hess = 0
        for w, ev in zip(self.weights, self.evals):
            v, g, h = ev.u_jet(points)
            val = val + w * v
            grad = grad + w * g
            hess = hess + w * h
        return val, grad, hess

    def __call__(self, points):
        points = np.atleast_2d(points)
        return sum(w * ev.u(points) for w, ev in zip(self.weights, self.evals))

    def sample(self, lo, hi, count):
        """Values on the tensor grid with ``count`` points per axis over ``[lo, hi]^n``."""
        axis = np.linspace(lo, hi, count)
        pts = np.array(list(itertools.product(axis, repeat=self.n)))
        return pts, self(pts)

    def h(self, omega):
        return self.level.h(omega)


def _box_points(n, radius, per_unit):
    count = int(2 * radius * per_unit) + 1
    axis = np.linspace(-radius, radius, count)
    if n == 1:
        return axis[:, None]
    if n == 2:
        return np.array(list(itertools.product(axis, repeat=2)))
    # in 3D sample shells along a sphere design to keep the cost bounded
    rng = np.random.default_rng(7)
    d = rng.normal(size=(400, 3))
    d /= np.linalg.norm(d, axis=1, keepdims=True)
    r = np.linspace(0, radius, count)
    return (r[:, None, None] * d[None, :, :]).reshape(-1, 3)


def growth_certificate(synth, epsilons=EPSILONS, radii=RADII, per_unit=8):
    """Shell suprema of ``|u(x)| exp(-(h(x/|x|) + eps)|x|)`` must not increase past radius 2."""
    n = synth.n
    pts = _box_points(n, max(radii), per_unit)
    r = np.linalg.norm(pts, axis=1)
    keep = r > 1e-12
    pts, r = pts[keep], r[keep]
    u = np.abs(synth(pts))
    hv = synth.h(pts / r[:, None])
    out = {"passed": True, "eps": {}}
    for eps in epsilons:
        weight = u * np.exp(-(hv + eps) * r)
        bounds = [0.0] + list(radii)
        sups = []
        for lo, hi in zip(bounds[:-1], bounds[1:]):
            sel = (r > lo) & (r <= hi)
            sups.append(float(weight[sel].max()) if sel.any() else 0.0)
        ok = all(sups[i + 1] <= sups[i] * (1 + 1e-9) + 1e-300 for i in range(len(sups) - 1))
        out["eps"][str(eps)] = {"shell_sup": sups, "passed": bool(ok)}
        out["passed"] &= bool(ok)
    return out


def synthesize_from_measure(op, xi_points, weights, mf=None, tol=DEFAULT_TOL, level=None):
    """``u = sum_i w_i u_{xi_i}`` for a finite measure on ``Xi`` with residual and growth checks."""
    xi_points = np.atleast_2d(np.asarray(xi_points, dtype=float))
    if xi_points.shape[1] != op.n and xi_points.shape[0] == op.n:
        xi_points = xi_points.T
    weights = np.asarray(weights, dtype=np.complex128).reshape(-1)
    if len(xi_points) == 0 or len(weights) != len(xi_points) or not np.any(np.abs(weights) > 0):
        raise EmptyMeasure("the measure has no mass")
    lam = LambdaFunction(op, mf)
    level = level or maximize_lambda(op, mf, tol, lam=lam)
    if level.classification == SUBZERO:
        raise XiNotOnLevelSet("Lambda_0 < 0, so the level set is empty")
    evals = []
    for xi in xi_points:
        ev = lam.eval(xi)
        if abs(ev.value) > tol.level:
            raise XiNotOnLevelSet(f"Lambda({xi.tolist()}) = {ev.value:.3e}")
        evals.append(ev)
    synth = DiscreteMeasureSynthesis(points=xi_points, weights=weights, evals=evals, level=level)
    pts = patch_points(op.n, 8)
    val, grad, hess = synth.jet(pts)
    synth.residual = float(np.linalg.norm(op.apply_jet(pts, val, grad, hess))
                           / max(np.linalg.norm(val), 1e-300))
    if synth.residual > tol.residual:
        raise FloquetLabError(f"synthesized solution residual {synth.residual:.3e}")
    synth.certificate = growth_certificate(synth)
    return synth


# ---------------------------------------------------------------- Floquet transform


@dataclass
class FloquetTransformValue:
    z: np.ndarray  # (P, n) points on the unit torus
    values: np.ndarray  # (P, *cell_grid) samples of Uf(z, .) on K
    origin: tuple  # lowest support corner, fixes the inversion window
    size: int | None  # points per axis for a uniform z grid, else None

    @property
    def n(self):
        return self.z.shape[1]


def uniform_z_grid(n, L):
    theta = 2 * np.pi * np.arange(L) / L
    return np.exp(1j * np.array(list(itertools.product(theta, repeat=n))))


def _z_power(z, gamma):
    return np.prod(z ** np.asarray(gamma)[None, :], axis=1)


def floquet_transform(f, z_grid=None):
    """``Uf(z, x) = sum over cells c of f_c(x) z^-c`` for ``f`` given per cell.

    ``f`` maps integer cell indices ``c`` to samples of ``f`` on ``K + c`` (at
    the same local grid for all cells).  ``z_grid`` is either an integer ``L``
    (uniform grid, ``L`` points per axis) or explicit points of shape ``(P, n)``.
    """
    if not f:
        raise ValueError("empty function")
    cells = {tuple(int(v) for v in c): np.asarray(v) for c, v in f.items()}
    n = len(next(iter(cells)))
    idx = np.array(list(cells))
    lo, hi = idx.min(axis=0), idx.max(axis=0)
    span = int((hi - lo).max()) + 1
    if z_grid is None:
        z_grid = span
    if isinstance(z_grid, (int, np.integer)):
        L = int(z_grid)
        if span > L:
            raise SupportTooLarge(f"support spans {span} cells but the z grid has {L} per axis")
        z = uniform_z_grid(n, L)
    else:
        L = None
        z = np.atleast_2d(np.asarray(z_grid, dtype=np.complex128))
    shape = next(iter(cells.values())).shape
    values = np.zeros((len(z),) + shape, dtype=np.complex128)
    for c, fc in cells.items():
        w = _z_power(z, -np.asarray(c))
        values += w.reshape((-1,) + (1,) * len(shape)) * fc
    return FloquetTransformValue(z=z, values=values, origin=tuple(int(v) for v in lo), size=L)


def inverse_floquet_transform(tv: FloquetTransformValue, tol=1e-13):
    """Cell functions ``f_c = mean over z of Uf(z, .) z^c`` on the uniform window."""
    if tv.size is None:
        raise SupportTooLarge("inversion needs a uniform z grid")
    n, L = tv.n, tv.size
    out = {}
    scale = np.abs(tv.values).max() if tv.values.size else 0.0
    tail = (1,) * (tv.values.ndim - 1)
    for off in itertools.product(range(L), repeat=n):
        c = tuple(o + s for o, s in zip(tv.origin, off))
        fc = (tv.values * _z_power(tv.z, np.asarray(c)).reshape((-1,) + tail)).mean(axis=0)
        if np.abs(fc).max() > tol * max(scale, 1.0):
            out[c] = fc
    return out


def parseval_gap(f, tv: FloquetTransformValue):
    """``sum_c ||f_c||^2`` minus the z-mean of ``||Uf(z, .)||^2`` (both cell L2 norms)."""
    direct = sum(float(np.mean(np.abs(v) ** 2)) for v in f.values())
    axes = tuple(range(1, tv.values.ndim))
    transformed = float(np.mean(np.mean(np.abs(tv.values) ** 2, axis=axes)))
    return direct - transformed, direct
