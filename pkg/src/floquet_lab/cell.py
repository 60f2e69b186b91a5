"""Cell problems: adjoint ground state, correctors, homogenized matrix, polynomial solutions."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from . import spectral
from .config import DEFAULT_TOL
from .errors import (
    AdjointKernelEmpty,
    CellCompatibilityFailed,
    CNotZero,
    CompatibilityFailed,
    NoPositiveEigenvector,
    NotQHarmonic,
    RecursionResidual,
    TraceConditionViolated,
    TruncationInsufficient,
)
from .operator_model import galerkin_parts
from .polyalgebra import GradedPolynomial, RightInverse, monomials
from .positive import _inner, conjugate_by_bloch, lambda_of_xi


def _zero_index(n, mf):
    return spectral.basis_size(n, mf) // 2


class CellSolver:
    """Fredholm solves ``L v = f - mu`` on the torus for an operator with ``L 1 = 0``.

    The bordered system ``[[G0, e0], [e0^T, 0]]`` returns the zero-mean solution
    ``v`` and the compatibility defect ``mu = integral of psi f``.
    """

    def __init__(self, op, mf):
        self.op = op
        self.mf = mf
        self.n = op.n
        self.parts = galerkin_parts(op, mf)
        p = self.parts
        n = self.n
        self.G0 = (
            -sum(p.a[i, j] * (p.d[i] * p.d[j])[None, :] for i in range(n) for j in range(n))
            + sum(p.b[i] * p.d[i][None, :] for i in range(n))
            + p.c
        )
        size = self.G0.shape[0]
        z = _zero_index(n, mf)
        bordered = np.zeros((size + 1, size + 1), dtype=np.complex128)
        bordered[:size, :size] = self.G0
        bordered[z, size] = 1.0
        bordered[size, z] = 1.0
        self._lu = scipy.linalg.lu_factor(bordered)
        self.size = size
        self.zero = z

    def solve(self, f):
        f = np.asarray(f, dtype=np.complex128)
        sol = scipy.linalg.lu_solve(self._lu, np.append(f, 0.0))
        v, mu = sol[:-1], sol[-1]
        rhs = f.copy()
        rhs[self.zero] -= mu
        res = np.linalg.norm(self.G0 @ v - rhs) / max(1.0, np.linalg.norm(f))
        return v, complex(mu), float(res)

    def constant(self, value=1.0):
        e = np.zeros(self.size, dtype=np.complex128)
        e[self.zero] = value
        return e

    def project(self, values):
        """Fourier vector of grid samples at the operator resolution."""
        return spectral.grid_to_vec(values, self.mf)


@dataclass
class CellSolution:
    op: object  # the operator with L 1 = 0 used for all cell solves
    mf: int
    psi: np.ndarray  # Fourier vector, integral 1
    alpha: np.ndarray
    gamma: np.ndarray
    Psi: list | None  # zero-mean correctors (Fourier vectors) or None when alpha != 0
    Q: np.ndarray | None
    solver: CellSolver = field(repr=False)
    bloch: object = None  # positive solution used to normalize, or None
    original: object = None  # operator before normalization
    residuals: dict = field(default_factory=dict)

    @property
    def n(self):
        return self.op.n

    @property
    def balanced(self):
        """``alpha = 0``: the case with ``n + 1`` linear-growth solutions."""
        return self.Psi is not None

    def psi_grid(self, ng=None):
        return spectral.vec_to_grid(self.psi, self.n, self.mf, ng or 4 * self.mf + 2).real

    def Psi_grid(self, ng=None):
        if self.Psi is None:
            return None
        return [spectral.vec_to_grid(v, self.n, self.mf, ng or 4 * self.mf + 2).real
                for v in self.Psi]


def _quad_size(op, mf):
    return max(6 * mf + 2 * op.bandwidth + 2, op.resolution)


def normalize_operator(op, mf=None, tol=DEFAULT_TOL):
    """Return ``(L~, bloch)``: ``L`` itself when ``c = 0``, else ``u0^-1 L u0`` with ``L u0 = 0``."""
    mf = op.default_mf if mf is None else mf
    if op.c_is_zero:
        return op, None
    ev = lambda_of_xi(op, np.zeros(op.n), mf)
    if abs(ev.value) > 10 * tol.level:
        raise CNotZero(f"c is not zero and Lambda(0) = {ev.value:.3e} != 0")
    return conjugate_by_bloch(op, ev, resolution=max(op.resolution, 8 * mf)), ev


def solve_cell(op, mf=None, tol=DEFAULT_TOL, require_correctors=False):
    """Adjoint ground state, drift averages, correctors and the homogenized matrix."""
    mf = int(op.meta.get("cell_mf", op.default_mf)) if mf is None else mf
    original = op
    op, bloch = normalize_operator(op, mf, tol)
    n = op.n
    try:
        ev = lambda_of_xi(op, np.zeros(n), mf)
    except NoPositiveEigenvector as exc:
        raise AdjointKernelEmpty(str(exc)) from exc
    if abs(ev.value) > 1e-8:
        raise AdjointKernelEmpty(f"torus eigenvalue at 0 is {ev.value:.3e}, not 0")
    # ev.p is the constant 1, so ev.p_star is the density psi.
    psi = ev.p_star * ev.p[_zero_index(n, mf)]
    solver = CellSolver(op, mf)
    b_vec = [solver.project(op.b[i]) for i in range(n)]
    alpha = np.array([_inner(b_vec[i], psi, n, mf).real for i in range(n)])
    gamma = alpha.copy()  # the drift of the normalized operator at xi = 0
    scale = max(1.0, max(np.abs(b_vec[i]).max() for i in range(n)))
    residuals = {"adjoint": float(np.linalg.norm(solver.G0.T @ psi))}
    balanced = np.abs(alpha).max() <= 1e-7 * scale
    if not balanced:
        if require_correctors:
            raise CompatibilityFailed(f"drift average {alpha} is not zero", alpha=alpha)
        return CellSolution(op=op, mf=mf, psi=psi, alpha=alpha, gamma=gamma, Psi=None, Q=None,
                            solver=solver, bloch=bloch, original=original, residuals=residuals)
    Psi = []
    worst = 0.0
    for i in range(n):
        v, mu, res = solver.solve(-b_vec[i])
        if abs(mu + alpha[i]) > tol.compat * scale:
            raise CellCompatibilityFailed(f"corrector {i}: defect {mu} vs -alpha {-alpha[i]}")
        worst = max(worst, res)
        Psi.append(v)
    residuals["corrector"] = worst
    Q = homogenized_matrix(op, mf, psi, Psi)
    return CellSolution(op=op, mf=mf, psi=psi, alpha=alpha, gamma=gamma, Psi=Psi, Q=Q,
                        solver=solver, bloch=bloch, original=original, residuals=residuals)


def homogenized_matrix(op, mf, psi, Psi):
    """``q_ij = integral of psi (e_i + grad Psi_i) . a (e_j + grad Psi_j)``."""
    n = op.n
    ng = _quad_size(op, mf)
    a = np.stack([[spectral.resample(op.a[i, j], ng) for j in range(n)] for i in range(n)]).real
    w = spectral.vec_to_grid(psi, n, mf, ng).real
    cols = []
    for i in range(n):
        g = [spectral.vec_to_grid(spectral.derivative_vec(Psi[i], n, mf, k), n, mf, ng).real
             for k in range(n)]
        g[i] = g[i] + 1.0
        cols.append(g)
    Q = np.empty((n, n))
    for i in range(n):
        for j in range(n):
            integrand = sum(cols[i][k] * a[k, l] * cols[j][l] for k in range(n) for l in range(n))
            Q[i, j] = (integrand * w).mean()
    return 0.5 * (Q + Q.T)


# ---------------------------------------------------------------- polynomial solutions


def _monomial_jet(exp, points):
    """Value, gradient and Hessian of ``x^exp`` at points."""
    points = np.atleast_2d(points)
    npts, n = points.shape
    exp = np.asarray(exp)

    def mono(e):
        if np.any(e < 0):
            return np.zeros(npts)
        return np.prod(points ** e, axis=1)

    val = mono(exp)
    grad = np.zeros((npts, n))
    hess = np.zeros((npts, n, n))
    for i in range(n):
        ei = np.eye(n, dtype=int)[i]
        grad[:, i] = exp[i] * mono(exp - ei)
        for j in range(n):
            ej = np.eye(n, dtype=int)[j]
            fac = exp[i] * (exp[j] - (1 if i == j else 0))
            hess[:, i, j] = fac * mono(exp - ei - ej)
    return val, grad, hess


@dataclass
class PolyGrowthSolution:
    """``u(x) = sum_j x^j p_j(x)`` with periodic ``p_j`` (Fourier vectors).

    When ``bloch`` is set the solution of the original operator is ``p0(x) u(x)``,
    ``p0`` the positive periodic solution used for normalization.
    """

    n: int
    mf: int
    terms: dict
    order: int
    op: object  # operator whose solution this is (before normalization)
    bloch: object = None
    label: str = ""
    q: np.ndarray = None
    V: object = None  # slow-variable polynomial for two-scale constructions

    def __post_init__(self):
        if self.q is None:
            self.q = np.zeros(self.n)

    def jet(self, points):
        points = np.atleast_2d(np.asarray(points, dtype=float))
        npts, n = points.shape
        val = np.zeros(npts, dtype=np.complex128)
        grad = np.zeros((npts, n), dtype=np.complex128)
        hess = np.zeros((npts, n, n), dtype=np.complex128)
        for exp, vec in self.terms.items():
            mv, mg, mh = _monomial_jet(exp, points)
            pv, pg, ph = spectral.jet_vec(vec, n, self.mf, points)
            val += mv * pv
            grad += mg * pv[:, None] + mv[:, None] * pg
            hess += (mh * pv[:, None, None] + mv[:, None, None] * ph
                     + mg[:, :, None] * pg[:, None, :] + pg[:, :, None] * mg[:, None, :])
        if self.bloch is not None:
            bv, bg, bh = self.bloch.u_jet(points)
            hess = (hess * bv[:, None, None] + val[:, None, None] * bh
                    + grad[:, :, None] * bg[:, None, :] + bg[:, :, None] * grad[:, None, :])
            grad = grad * bv[:, None] + val[:, None] * bg
            val = val * bv
        return val, grad, hess

    def __call__(self, points):
        return self.jet(points)[0]

    def residual(self, points_per_cell=8):
        """``||L u|| / ||u||`` on a uniform grid of the ``3^n`` cells around the origin."""
        pts = patch_points(self.n, points_per_cell)
        val, grad, hess = self.jet(pts)
        lu = self.op.apply_jet(pts, val, grad, hess)
        return float(np.linalg.norm(lu) / max(np.linalg.norm(val), 1e-300))

    def cell_norms(self, radius=8, points_per_cell=6, max_cells=400):
        """``(|gamma|, ||u||_{L2(K + gamma)})`` over sampled cells with ``|gamma| <= radius``."""
        return cell_norms(self, self.n, radius, points_per_cell, max_cells)

    def growth_certificate(self, radius=8, order=None):
        order = self.order if order is None else order
        return growth_certificate(self.cell_norms(radius), order)

    def as_polynomial_table(self):
        """``{exponent: Fourier vector}`` with keys as lists, for reports."""
        return {tuple(int(e) for e in k): v for k, v in self.terms.items()}


def patch_points(n, per_cell):
    axis = (np.arange(3 * per_cell) + 0.5) / per_cell - 1.0
    return np.array(list(itertools.product(axis, repeat=n)))


def _sample_cells(n, radius, max_cells):
    rng = np.random.default_rng(12345)
    full = [np.array(g) for g in itertools.product(range(-radius, radius + 1), repeat=n)
            if np.linalg.norm(g) <= radius]
    if len(full) <= max_cells:
        return full
    keep = [g for g in full if np.count_nonzero(g) <= 1 or len(set(np.abs(g))) == 1]
    rest = [g for g in full if not (np.count_nonzero(g) <= 1 or len(set(np.abs(g))) == 1)]
    pick = rng.choice(len(rest), size=max(0, max_cells - len(keep)), replace=False)
    return keep + [rest[i] for i in sorted(pick)]


def cell_norms(fn, n, radius=8, per_cell=6, max_cells=400):
    base = (np.array(list(itertools.product(range(per_cell), repeat=n))) + 0.5) / per_cell
    out = []
    for g in _sample_cells(n, radius, max_cells):
        vals = fn(base + g)
        out.append((float(np.linalg.norm(g)), float(np.sqrt(np.mean(np.abs(vals) ** 2)))))
    return out


def growth_certificate(norms, order):
    """Polynomial growth check: far cells obey the constant fitted on near cells, up to 2x."""
    ratios = [(r, v / (1 + r) ** order) for r, v in norms]
    near = max(v for r, v in ratios if r <= 2)
    far = max((v for r, v in ratios if r > 2), default=0.0)
    return {"order": order, "C_near": near, "C_far": far, "passed": bool(far <= 2 * near)}


def _solution(cell, terms, order, label):
    clean = {tuple(k): v for k, v in terms.items() if np.abs(v).max() > 0}
    return PolyGrowthSolution(n=cell.n, mf=cell.mf, terms=clean, order=order,
                              op=cell.original if cell.original is not None else cell.op,
                              bloch=cell.bloch, label=label)


def _unit(n, i):
    e = [0] * n
    e[i] = 1
    return tuple(e)


def linear_growth_basis(op, cell: CellSolution, tol=DEFAULT_TOL):
    """``{1, x_j + Psi_j}`` when ``alpha = 0``; ``{1}`` and ``n - 1`` combined solutions otherwise."""
    n = cell.n
    one = cell.solver.constant()
    zero = (0,) * n
    basis = [_solution(cell, {zero: one}, 0, "1")]
    if cell.balanced:
        for j in range(n):
            basis.append(_solution(cell, {_unit(n, j): one, zero: cell.Psi[j]}, 1, f"F{j + 1}"))
        return basis
    s = cell.solver
    b_vec = [s.project(cell.op.b[i]) for i in range(n)]
    k = int(np.argmax(np.abs(cell.alpha)))
    for j in range(n):
        if j == k:
            continue
        ratio = cell.alpha[j] / cell.alpha[k]
        v, mu, _ = s.solve(-(b_vec[j] - ratio * b_vec[k]))
        if abs(mu) > tol.compat * max(1.0, np.abs(b_vec[j]).max()):
            raise CellCompatibilityFailed(f"combined corrector {j}: defect {mu}")
        basis.append(_solution(cell, {_unit(n, j): one, _unit(n, k): -ratio * one, zero: v}, 1,
                               f"F{j + 1}"))
    return basis


def quadratic_solution(op, cell: CellSolution, C, tol=DEFAULT_TOL):
    """``u = 1/2 Cx.x + sum_j x_j (C Psi)_j + p0`` for symmetric ``C`` with ``tr(Q C) = 0``."""
    n = cell.n
    C = np.asarray(C, dtype=float).reshape(n, n)
    if not np.allclose(C, C.T, atol=1e-14):
        raise ValueError("C must be symmetric")
    if not cell.balanced:
        raise CompatibilityFailed("quadratic solutions need a zero drift average", alpha=cell.alpha)
    trace = float(np.trace(cell.Q @ C.T))
    if abs(trace) > tol.trace:
        raise TraceConditionViolated(f"tr(Q C^T) = {trace:.3e}")
    s = cell.solver
    parts = s.parts
    p = [sum(C[j, k] * cell.Psi[k] for k in range(n)) for j in range(n)]
    f = np.zeros(s.size, dtype=np.complex128)
    for j in range(n):
        for k in range(n):
            f += 2 * parts.a[j, k] @ (parts.d[k] * p[j])
            f += C[j, k] * (parts.a[j, k] @ s.constant())
        f -= parts.b[j] @ p[j]
    p0, mu, res = s.solve(f)
    if abs(mu) > tol.compat * max(1.0, np.abs(f).max()):
        raise CellCompatibilityFailed(f"compatibility defect {abs(mu):.3e} for p0")
    one = s.constant()
    terms = {}
    for i in range(n):
        for j in range(i, n):
            e = [0] * n
            e[i] += 1
            e[j] += 1
            terms[tuple(e)] = (0.5 * C[i, i] if i == j else C[i, j]) * one
    for j in range(n):
        terms[_unit(n, j)] = terms.get(_unit(n, j), 0) + p[j]
    terms[(0,) * n] = p0
    return _solution(cell, terms, 2, "quadratic")


def independent_traceless(Q):
    """Basis of symmetric ``C`` with ``tr(Q C) = 0``."""
    n = Q.shape[0]
    sym = []
    for i in range(n):
        for j in range(i, n):
            E = np.zeros((n, n))
            E[i, j] = E[j, i] = 1.0
            sym.append(E)
    traces = np.array([np.trace(Q @ E) for E in sym])
    _, _, vh = np.linalg.svd(traces[None, :])
    null = vh[1:]
    return [sum(c * E for c, E in zip(row, sym)) for row in null]


@dataclass
class TwoScale:
    phi: dict  # multi-index -> Fourier vector
    m: dict  # multi-index with |mu| >= 2 -> constant
    s_max: int
    residual: float

    def symbol(self, s):
        """Symbol of ``M_s = sum_{|mu| = s} m_mu d^mu`` in the ``D = -i d`` convention."""
        n = len(next(iter(self.phi)))
        return GradedPolynomial(n, {mu: v * (1j) ** s for mu, v in self.m.items() if sum(mu) == s})

    def M2_matrix(self):
        n = len(next(iter(self.phi)))
        Q = np.zeros((n, n))
        for i in range(n):
            for j in range(n):
                mu = [0] * n
                mu[i] += 1
                mu[j] += 1
                v = self.m[tuple(mu)].real
                Q[i, j] = -v if i == j else -v / 2
        return Q


def two_scale_correctors(op, cell: CellSolution, s_max=4, tol=DEFAULT_TOL):
    """Cell hierarchy ``L0 phi_mu + L1 phi_{mu-1} + L2 phi_{mu-2} = m_mu``, ``|mu| <= s_max``."""
    if not cell.balanced:
        raise CompatibilityFailed("two-scale recursion needs a zero drift average", alpha=cell.alpha)
    if s_max > 6:
        raise ValueError("s_max above 6 is outside the supported range")
    n = cell.n
    s = cell.solver
    parts = s.parts
    B = [parts.first_order(i) for i in range(n)]
    zero = (0,) * n
    phi = {zero: s.constant()}
    m = {}
    worst = 0.0
    for order in range(1, s_max + 1):
        for mu in monomials(n, order):
            rhs = np.zeros(s.size, dtype=np.complex128)
            for i in range(n):
                prev = tuple(a - (1 if d == i else 0) for d, a in enumerate(mu))
                if min(prev) >= 0:
                    rhs += B[i] @ phi[prev]
                for j in range(n):
                    prev2 = tuple(a - (1 if d == i else 0) - (1 if d == j else 0)
                                  for d, a in enumerate(mu))
                    if min(prev2) >= 0:
                        rhs -= parts.a[i, j] @ phi[prev2]
            v, mu_c, res = s.solve(-rhs)
            # mu_c = integral of psi (-rhs); m_mu = integral of psi rhs
            if order == 1:
                if abs(mu_c) > tol.compat * max(1.0, np.abs(rhs).max()):
                    raise RecursionResidual(f"first-order compatibility defect {abs(mu_c):.3e}")
            else:
                m[mu] = -mu_c
            if res > tol.compat:
                raise RecursionResidual(f"cell solve residual {res:.3e} at {mu}")
            worst = max(worst, res)
            phi[mu] = v
    return TwoScale(phi=phi, m=m, s_max=s_max, residual=worst)


def Q_polynomial(Q):
    n = Q.shape[0]
    terms = {}
    for i in range(n):
        for j in range(i, n):
            e = [0] * n
            e[i] += 1
            e[j] += 1
            terms[tuple(e)] = Q[i, j] if i == j else 2 * Q[i, j]
    return GradedPolynomial(n, terms)


def higher_order_solution(op, cell: CellSolution, U0, s_max=None, tol=DEFAULT_TOL, scale=None):
    """``u = sum_nu phi_nu d^nu V`` with ``V = A^-1 U0`` for a ``Q``-harmonic homogeneous ``U0``."""
    N = U0.degree
    if N < 0:
        raise ValueError("U0 must be nonzero")
    if not U0.is_homogeneous():
        raise ValueError("U0 must be homogeneous")
    s_max = max(N, 2) if s_max is None else s_max
    if s_max < N:
        raise TruncationInsufficient(f"s_max {s_max} below degree {N}")
    Qp = Q_polynomial(cell.Q)
    if Qp.apply(U0).norm() > 1e-8 * max(1.0, U0.norm()):
        raise NotQHarmonic("Q_hom(D) U0 does not vanish")
    ts = scale if scale is not None else two_scale_correctors(op, cell, s_max, tol)
    if ts.s_max < N:
        raise TruncationInsufficient(f"two-scale data of order {ts.s_max} below degree {N}")
    R = RightInverse(Qp)
    symbols = {s: ts.symbol(s) for s in range(3, N + 1)}
    V = U0
    for _ in range(N + 1):
        acc = GradedPolynomial.zero(cell.n)
        for sym in symbols.values():
            acc = acc + sym.apply(V)
        V_new = U0 - R(acc)
        if (V_new - V).norm() <= 1e-15:
            V = V_new
            break
        V = V_new
    V = V.chop(1e-14 * max(1.0, U0.norm()))
    terms = {}
    for nu, vec in ts.phi.items():
        if sum(nu) > N:
            continue
        dV = V.derivative(nu)
        for exp, coef in dV.terms.items():
            terms[exp] = terms.get(exp, 0) + coef * vec
    sol = _solution(cell, terms, N, f"U0 deg {N}")
    sol.V = V
    return sol


def symbol_diagnostic(op, cell, two_scale=None, order=3, mf=None, h=0.05):
    """Compare Taylor coefficients of ``Lambda`` at 0 with the constants ``m_mu`` (reported only)."""
    from .bands import _STENCILS

    n = cell.n
    ts = two_scale or two_scale_correctors(op, cell, order)
    target = cell.original if cell.original is not None else cell.op
    mf = mf or cell.mf
    offs = np.arange(-2, 3)
    out = {}

    def table(step):
        t = np.empty((5,) * n)
        for idx in itertools.product(range(5), repeat=n):
            t[idx] = lambda_of_xi(target, step * offs[list(idx)], mf, adjoint=False).value
        return t

    tabs = {step: table(step) for step in (h, h / 2)}
    diffs = []
    for s in range(2, order + 1):
        for mu in monomials(n, s):
            vals = []
            for step in (h, h / 2):
                w = tabs[step]
                for axis, o in enumerate(mu):
                    w = np.tensordot(_STENCILS[o], w, axes=([0], [0])) / step**o
                vals.append(float(w))
            coef = (4 * vals[1] - vals[0]) / 3 / math.prod(math.factorial(a) for a in mu)
            m_mu = float(ts.m[mu].real)
            out["".join(map(str, mu))] = {"taylor": coef, "m": m_mu}
            diffs.append(abs(coef - m_mu))
    return {"coefficients": out, "max_difference": max(diffs), "asserted": False}
