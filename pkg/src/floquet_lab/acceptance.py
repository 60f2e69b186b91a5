"""The acceptance suite: ten end-to-end checks on the bundled operators."""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from . import presets
from .bands import band_minimum, compute_bands, duality_check
from .cell import (
    Q_polynomial,
    higher_order_solution,
    independent_traceless,
    linear_growth_basis,
    quadratic_solution,
    solve_cell,
    two_scale_correctors,
)
from .liouville import (
    FINITE,
    VACUOUS,
    floquet_transform,
    inverse_floquet_transform,
    liouville_dimensions,
    parseval_gap,
    synthesize_from_measure,
)
from .polyalgebra import GradedPolynomial, h_dim, kernel_basis, q_dim, qharmonic_dim
from .positive import lambda0_criteria, lambda_of_xi, maximize_lambda


@dataclass
class CriterionResult:
    number: int
    name: str
    passed: bool
    seconds: float = 0.0
    budget: float | None = None
    detail: dict = field(default_factory=dict)

    def line(self):
        status = "PASS" if self.passed else "FAIL"
        budget = f" (budget {self.budget:.0f}s)" if self.budget else ""
        return f"[{status}] {self.number:2d}. {self.name}: {self.seconds:.1f}s{budget}"


def bottom_shifted(op, mf=None):
    """``op - lambda_1(0)``: the operator moved so its band bottom sits at level 0."""
    shift = lambda_of_xi(op, np.zeros(op.n), mf, adjoint=False).value
    out = op.shifted(-shift)
    out.meta.update(op.meta)
    return out


def _run(number, name, budget, fn):
    start = time.perf_counter()
    try:
        ok, detail = fn()
    except Exception as exc:  # reported as a failure, never swallowed silently
        ok, detail = False, {"error": f"{type(exc).__name__}: {exc}"}
    seconds = time.perf_counter() - start
    if budget is not None and seconds > budget:
        detail["over_budget"] = True
        ok = False
    return CriterionResult(number, name, bool(ok), seconds, budget, detail)


# ---------------------------------------------------------------- criteria


def crit_dimension_formulas():
    rng = np.random.default_rng(0)
    mismatches = []
    checked = 0
    for n in (1, 2, 3):
        forms = []
        A = rng.normal(size=(n, n))
        spd = A @ A.T + n * np.eye(n)
        forms.append(("quadratic", Q_polynomial(np.eye(n))))
        forms.append(("quadratic", Q_polynomial(spd)))
        if n >= 2:
            forms.append(("quadratic", GradedPolynomial.parse("xi1*xi2", n)
                          + (GradedPolynomial.parse("xi3^2", n) if n == 3 else 0)))
        forms.append(("linear", GradedPolynomial.variable(n, n - 1)))
        forms.append(("linear", GradedPolynomial(n, {tuple(np.eye(n, dtype=int)[i]): c
                                                     for i, c in enumerate(rng.normal(size=n))})))
        if n >= 2:
            forms.append(("linear", GradedPolynomial.parse("xi1 + I*xi2", n)))
        for kind, Q in forms:
            for N in range(7):
                expect = h_dim(n, N) if kind == "quadratic" else q_dim(n - 1, N)
                got = qharmonic_dim(Q, n, N)
                checked += 1
                if got != expect:
                    mismatches.append({"n": n, "N": N, "Q": repr(Q), "got": got, "expect": expect})
    return not mismatches, {"checked": checked, "mismatches": mismatches}


def crit_laplacian():
    op2 = presets.get("laplacian2d")
    rng = np.random.default_rng(1)
    xs = rng.normal(size=(20, 2))
    xs *= (3 * rng.random(20) ** 0.5 / np.linalg.norm(xs, axis=1))[:, None]
    lam_err = max(abs(lambda_of_xi(op2, xi, adjoint=False).value + xi @ xi) for xi in xs)
    bs = compute_bands(op2, 17, 3)
    grid = bs.k_grid
    band_err = float(np.abs(bs.sorted_bands()[:, 0] - (grid**2).sum(axis=1)).max())
    report = liouville_dimensions(op2, 2)
    ok = lam_err <= 1e-9 and band_err <= 1e-9 and report.d == [1, 3, 5]
    return ok, {"lambda_error": lam_err, "band_error": band_err, "d": report.d}


def crit_mathieu():
    op = presets.get("mathieu")
    info = band_minimum(op)
    shifted = bottom_shifted(op)
    report = liouville_dimensions(shifted, 4)
    unique = len(info["grid_minima"]) == 1 and len(info["near_minimum"]) == 1
    ok = (unique and abs(info["k_min"]) <= 1e-4 and info["second_derivative"] > 0
          and info["gap"] > 0 and report.d[1:] == [2, 2, 2, 2])
    return ok, {**info, "mf": op.default_mf, "d_shifted": report.d}


def crit_homogenization():
    op = presets.get("sin_divform")
    cell = solve_cell(op)
    ts = two_scale_correctors(op, cell, 2)
    q = float(cell.Q[0, 0])
    m2 = float(ts.M2_matrix()[0, 0])
    ok = abs(q - np.sqrt(3)) <= 1e-6 and abs(m2 - q) <= 1e-6
    return ok, {"Q_hom": q, "M2": m2, "sqrt3": float(np.sqrt(3))}


def hessian_ratio(op, cell=None):
    """FD Hessian of Lambda at the maximizer and ``Q_hom`` of the operator normalized there."""
    level = maximize_lambda(op, check_convexity=False)
    H = level.hessian
    cell = cell or solve_cell(op)
    return H, cell.Q


def crit_hessian():
    H0, Q0 = hessian_ratio(presets.get("laplacian1d"))
    const = float(-H0[0, 0] / Q0[0, 0])
    rows = {}
    ok = True
    for name in ("sin_divform", "checker2d"):
        H, Q = hessian_ratio(presets.get(name))
        rel = float(np.linalg.norm(H + const * Q) / np.linalg.norm(const * Q))
        rows[name] = {"hessian": H.tolist(), "Q_hom": Q.tolist(), "relative_error": rel}
        ok &= rel <= 0.02
    return ok, {"constant": const, "operators": rows}


ALL_PRESETS = ("laplacian1d", "laplacian2d", "mathieu", "sin_divform", "drift1d", "shifted1d",
               "checker2d", "shear2d")


def crit_lambda0():
    rows = {}
    ok = True
    ops = {name: presets.get(name) for name in ALL_PRESETS}
    ops["mathieu@bottom"] = bottom_shifted(ops["mathieu"])
    for name, op in ops.items():
        rep = lambda0_criteria(op)
        rows[name] = rep
        ok &= rep["consistent"]
    drift = rows["drift1d"]
    ok &= abs(drift["lambda0"] - 1) <= 1e-6 and abs(drift["xi_star"][0] - 1) <= 1e-4
    return ok, {"operators": rows}


def crit_liouville():
    drift = liouville_dimensions(presets.get("drift1d"), 4)
    shifted = liouville_dimensions(presets.get("shifted1d"), 4)
    lap = liouville_dimensions(presets.get("laplacian2d"), 4)
    ok = (drift.classification == FINITE and drift.d == [1] * 5
          and shifted.classification == VACUOUS
          and lap.d == [h_dim(2, N) for N in range(5)])
    return ok, {"drift1d": drift.d, "shifted1d": shifted.classification, "laplacian2d": lap.d}


def _quadratic_poly(C):
    n = C.shape[0]
    terms = {}
    for i in range(n):
        for j in range(i, n):
            e = [0] * n
            e[i] += 1
            e[j] += 1
            terms[tuple(e)] = 0.5 * C[i, i] if i == j else C[i, j]
    return GradedPolynomial(n, terms)


def constructed_solutions(op):
    cell = solve_cell(op)
    sols = list(linear_growth_basis(op, cell))
    if cell.balanced:
        ts = two_scale_correctors(op, cell, 3)
        for C in independent_traceless(cell.Q):
            sols.append(quadratic_solution(op, cell, C))
            sols.append(higher_order_solution(op, cell, _quadratic_poly(C), 3, scale=ts))
        for N in (1, 3):
            for U0 in kernel_basis(Q_polynomial(cell.Q), N)[N]:
                if N == 3 or op.n == 1:
                    sols.append(higher_order_solution(op, cell, U0, 3, scale=ts))
    return sols


def crit_constructed():
    rows = {}
    ok = True
    ops = {name: presets.get(name) for name in ("laplacian2d", "sin_divform", "drift1d",
                                                "checker2d", "shear2d")}
    ops["mathieu@bottom"] = bottom_shifted(presets.get("mathieu"))
    for name, op in ops.items():
        entries = []
        for sol in constructed_solutions(op):
            res = sol.residual()
            cert = sol.growth_certificate(8)
            good = res <= 1e-6 and cert["passed"]
            ok &= good
            entries.append({"label": sol.label, "order": sol.order, "residual": res,
                            "growth": cert, "passed": good})
        rows[name] = entries
    return ok, {"operators": rows, "count": sum(len(v) for v in rows.values())}


def crit_floquet():
    rng = np.random.default_rng(2)
    worst_parseval = worst_inverse = 0.0
    for n in (1, 2, 3):
        for trial in range(3):
            span = rng.integers(1, 6, size=n)
            origin = rng.integers(-3, 3, size=n)
            shape = (6,) * n if n < 3 else (3,) * n
            f = {}
            for c in np.ndindex(*span):
                if rng.random() < 0.7 or not f:
                    f[tuple(int(v) for v in origin + np.array(c))] = rng.normal(size=shape)
            tv = floquet_transform(f, int(span.max()))
            gap, norm = parseval_gap(f, tv)
            worst_parseval = max(worst_parseval, abs(gap) / max(norm, 1.0))
            back = inverse_floquet_transform(tv)
            keys = set(f) | set(back)
            err = max(np.abs(back.get(c, 0) - f.get(c, 0)).max() for c in keys)
            worst_inverse = max(worst_inverse, float(err))
    dual = {}
    for name in ALL_PRESETS:
        op = presets.get(name)
        ks = rng.uniform(-np.pi, np.pi, size=(3, op.n))
        ks = np.vstack([ks, ks[:1] + 0.5j])
        dual[name] = duality_check(op, ks)["max_distance"]
    ok = worst_parseval <= 1e-10 and worst_inverse <= 1e-12 and max(dual.values()) <= 1e-8
    return ok, {"parseval": worst_parseval, "inverse": worst_inverse, "duality": dual}


def crit_synthesis():
    op = presets.get("shifted1d")
    level = maximize_lambda(op)
    x = np.linspace(-5, 5, 201)[:, None]
    rows = {}
    ok = True
    for label, w, ref in (("cosh", (0.5, 0.5), np.cosh), ("sinh", (0.5, -0.5), np.sinh)):
        synth = synthesize_from_measure(op, [[1.0], [-1.0]], w, level=level)
        err = float(np.abs(synth(x) - ref(x[:, 0])).max())
        rows[label] = {"max_error": err, "residual": synth.residual,
                       "certificate": synth.certificate}
        ok &= err <= 1e-7 and synth.certificate["passed"]
    rows["h(+1)"] = float(level.h([[1.0]])[0])
    rows["h(-1)"] = float(level.h([[-1.0]])[0])
    return ok, rows


CRITERIA = (
    (1, "dimension formulas", 10, crit_dimension_formulas),
    (2, "Laplacian calibration", 30, crit_laplacian),
    (3, "Mathieu band minimum and d_N", 60, crit_mathieu),
    (4, "homogenization oracle", None, crit_homogenization),
    (5, "Hessian-homogenization proportionality", None, crit_hessian),
    (6, "Lambda_0 criteria consistency", None, crit_lambda0),
    (7, "Liouville case split", None, crit_liouville),
    (8, "constructed solutions", None, crit_constructed),
    (9, "Floquet transform and duality", None, crit_floquet),
    (10, "synthesis on Xi", None, crit_synthesis),
)

TOTAL_BUDGET = 600


def run_all(only=None, stream=None):
    results = []
    for number, name, budget, fn in CRITERIA:
        if only and number not in only:
            continue
        res = _run(number, name, budget, fn)
        results.append(res)
        if stream is not None:
            print(res.line(), file=stream, flush=True)
    return results
