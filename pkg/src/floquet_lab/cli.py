"""Command-line front end: ``floquet-lab <subcommand> [options]``.

Exit status: 0 success, 1 computation failure, 2 configuration error,
3 acceptance failure (``verify-all`` only).
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from dataclasses import fields

import numpy as np

from . import presets
from .config import DEFAULT_TOL, RunConfig, Tolerances
from .errors import ConfigError, FloquetLabError
from .operator_model import build_operator
from .reports import RunManifest

COMMANDS = ("bands", "lambda", "qharm", "homogenize", "liouville", "synthesize", "verify-all")


def _common(p):
    p.add_argument("--preset", choices=presets.NAMES, help="bundled operator")
    p.add_argument("--spec", help="operator JSON file")
    p.add_argument("--resolution", type=int, help="coefficient grid size per axis")
    p.add_argument("--mf", type=int, help="Fourier truncation |m_i| <= mf")
    p.add_argument("--nmax", type=int, default=2, help="largest growth order N")
    p.add_argument("--level", type=float, default=0.0, help="spectral level for Fermi points")
    p.add_argument("--out", default="out", help="output directory")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=None,
                   help="worker threads (default: FLOQUET_LAB_THREADS or 1)")
    for f in fields(Tolerances):
        p.add_argument(f"--tol.{f.name}", dest=f"tol_{f.name}", type=float, default=None,
                       metavar="X", help=f"tolerance (default {getattr(DEFAULT_TOL, f.name):g})")


def build_parser():
    parser = argparse.ArgumentParser(prog="floquet-lab", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("bands", help="band functions, real Fermi points, Taylor data")
    _common(p)
    p.add_argument("--points", type=int, default=33, help="k points per axis")
    p.add_argument("--bands", type=int, default=4, help="number of branches J")

    p = sub.add_parser("lambda", help="Lambda(xi), Lambda_0 and the level set Xi")
    _common(p)
    p.add_argument("--rays", type=int, default=None, help="ray directions (n >= 2)")
    p.add_argument("--ray-length", type=float, default=3.0)
    p.add_argument("--ray-points", type=int, default=31)

    p = sub.add_parser("qharm", help="dimension of Q-harmonic polynomials")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--N", type=int, required=True)
    p.add_argument("--q", help='polynomial such as "xi1^2+xi2^2"')
    p.add_argument("--q-json", help="JSON [[exponent, coeff], ...] (a file path or literal)")
    p.add_argument("--basis", action="store_true", help="include a kernel basis")
    p.add_argument("--out", default="out")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=None)

    p = sub.add_parser("homogenize", help="cell problems and the homogenized matrix")
    _common(p)
    p.add_argument("--dump-fields", action="store_true", help="CSV of psi and Psi on the grid")

    p = sub.add_parser("liouville", help="dimensions d_N of polynomially growing solutions")
    _common(p)

    p = sub.add_parser("synthesize", help="solutions from a discrete measure on Xi")
    _common(p)
    p.add_argument("--measure", required=True,
                   help='JSON {"points": [[...]], "weights": [...]} (a file path or literal)')
    p.add_argument("--box", type=float, nargs=3, default=[-5.0, 5.0, 101],
                   metavar=("LO", "HI", "COUNT"))

    p = sub.add_parser("verify-all", help="run the acceptance suite")
    p.add_argument("--out", default="out")
    p.add_argument("--only", type=int, nargs="*", help="criterion numbers")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--threads", type=int, default=None)
    return parser


def _threads(args):
    if args.threads is not None:
        return args.threads
    env = os.environ.get("FLOQUET_LAB_THREADS")
    try:
        return int(env) if env else 1
    except ValueError:
        raise ConfigError(f"FLOQUET_LAB_THREADS={env!r} is not an integer") from None


def make_config(args):
    tol = {f.name: getattr(args, f"tol_{f.name}") for f in fields(Tolerances)
           if getattr(args, f"tol_{f.name}", None) is not None}
    skip = {"command", "preset", "spec", "resolution", "nmax", "level", "out", "seed", "threads"}
    params = {k: v for k, v in vars(args).items() if k not in skip and not k.startswith("tol_")}
    return RunConfig(
        command=args.command,
        preset=getattr(args, "preset", None),
        spec=getattr(args, "spec", None),
        resolution=getattr(args, "resolution", None),
        nmax=getattr(args, "nmax", 2),
        level=getattr(args, "level", 0.0),
        out=args.out,
        seed=args.seed,
        threads=_threads(args),
        tolerances=DEFAULT_TOL.replace(**tol),
        params=params,
    )


def load_operator(cfg):
    if cfg.preset and cfg.spec:
        raise ConfigError("give either --preset or --spec, not both")
    if cfg.preset:
        op = presets.get(cfg.preset, resolution=cfg.resolution)
    elif cfg.spec:
        try:
            with open(cfg.spec) as fh:
                spec = json.load(fh)
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read operator spec: {exc}") from exc
        if cfg.resolution:
            spec["grid_resolution"] = cfg.resolution
        op = build_operator(spec)
    else:
        raise ConfigError("an operator is required: --preset NAME or --spec FILE")
    mf = cfg.params.get("mf")
    if mf is not None:
        if mf < 1:
            raise ConfigError("--mf must be positive")
        op.meta["mf"] = mf
        op.meta["cell_mf"] = max(mf, op.meta.get("cell_mf", 0))
    return op


def _json_arg(text):
    if os.path.exists(text):
        with open(text) as fh:
            return json.load(fh)
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ConfigError(f"invalid JSON: {exc}") from exc


# ---------------------------------------------------------------- subcommands


def cmd_bands(cfg, man):
    from .bands import band_taylor, compute_bands, real_fermi_points

    op = load_operator(cfg)
    p = cfg.params
    with man.stage("bands"):
        bs = compute_bands(op, p["points"], p["bands"])
    rows = []
    for k, vals in zip(bs.k_grid, bs.bands):
        rows.append([float(v) for v in k] + [float(x) for v in vals for x in (v.real, v.imag)])
    header = [f"k{i + 1}" for i in range(op.n)]
    header += [f"{part}_lambda{j + 1}" for j in range(bs.branch_count) for part in ("re", "im")]
    man.write_csv("bands.csv", header, rows)
    with man.stage("fermi"):
        fermi = real_fermi_points(op, cfg.level, tol=cfg.tolerances)
    taylor = []
    with man.stage("taylor"):
        if not fermi.infinite:
            for q, m in zip(fermi.points, fermi.multiplicities):
                entry = {"q": q, "multiplicity": m}
                if m == 1:
                    try:
                        t = band_taylor(op, q, 4, cfg.level, tol=cfg.tolerances)
                        entry.update(l0=t.l0, trust_radius=t.trust_radius,
                                     coefficients=[term.to_json() for term in t.terms],
                                     error_estimates=t.errors)
                    except FloquetLabError as exc:
                        entry["marker"] = type(exc).__name__
                taylor.append(entry)
    man.write_json("bands.json", {
        "operator": op.label,
        "mf": bs.mf,
        "min_overlap": bs.min_overlap,
        "fermi_points": fermi.points,
        "multiplicities": fermi.multiplicities,
        "infinite": fermi.infinite,
        "heuristic": fermi.heuristic or None,
        "taylor": taylor,
    })
    return 0


def cmd_lambda(cfg, man):
    from .positive import LambdaFunction, maximize_lambda, ray_directions

    op = load_operator(cfg)
    p = cfg.params
    lam = LambdaFunction(op)
    dirs = ray_directions(op.n, p.get("rays"))
    with man.stage("ascent"):
        level = maximize_lambda(op, tol=cfg.tolerances, directions=dirs, lam=lam)
    with man.stage("rays"):
        rows = []
        for r, w in enumerate(dirs):
            for t in np.linspace(0, p["ray_length"], p["ray_points"]):
                xi = t * w
                rows.append([r] + [float(v) for v in xi] + [lam(xi)])
    man.write_csv("lambda_rays.csv", ["ray"] + [f"xi{i + 1}" for i in range(op.n)] + ["Lambda"],
                  rows)
    omegas = dirs
    man.write_json("lambda.json", {
        "lambda0": level.lambda0,
        "xi_star": level.xi_star,
        "classification": level.classification,
        "hessian": level.hessian,
        "xi_samples": level.samples,
        "h_samples": [{"omega": w, "h": float(level.h(w[None, :])[0])} for w in omegas]
        if len(level.samples) else [],
        "convex": level.convex,
    })
    return 0


def cmd_qharm(cfg, man):
    from .polyalgebra import GradedPolynomial, h_dim, kernel_basis, q_dim, qharmonic_dim

    p = cfg.params
    n, N = p["n"], p["N"]
    if not 1 <= n <= 6 or N < 0:
        raise ConfigError("need 1 <= n <= 6 and N >= 0")
    if bool(p.get("q")) == bool(p.get("q_json")):
        raise ConfigError("give exactly one of --q or --q-json")
    try:
        if p.get("q"):
            Q = GradedPolynomial.parse(p["q"], n)
        else:
            Q = GradedPolynomial.from_json(n, _json_arg(p["q_json"]))
    except (ValueError, TypeError, SyntaxError) as exc:
        raise ConfigError(f"cannot parse Q: {exc}") from exc
    with man.stage("rank"):
        dim = qharmonic_dim(Q, n, N)
    out = {"n": n, "N": N, "Q": Q.to_json(), "degree": Q.degree, "dimension": dim,
           "h_dim": h_dim(n, N), "q_dim": q_dim(n - 1, N)}
    if p.get("basis"):
        out["kernel_basis"] = {str(d): [b.to_json() for b in polys]
                               for d, polys in kernel_basis(Q, N).items()}
    man.write_json("qharm.json", out)
    print(json.dumps({"dimension": dim}))
    return 0


def cmd_homogenize(cfg, man):
    from .cell import solve_cell, two_scale_correctors
    from .positive import maximize_lambda

    op = load_operator(cfg)
    with man.stage("cell"):
        cell = solve_cell(op, tol=cfg.tolerances)
    psi = cell.psi_grid()
    out = {
        "psi_stats": {"min": psi.min(), "max": psi.max(), "mean": psi.mean()},
        "alpha": cell.alpha,
        "gamma": cell.gamma,
        "balanced": cell.balanced,
        "Q_hom": cell.Q,
        "normalized_by_positive_solution": cell.bloch is not None,
        "residuals": cell.residuals,
    }
    if cell.balanced:
        with man.stage("two_scale"):
            ts = two_scale_correctors(op, cell, 2, tol=cfg.tolerances)
        out["M2"] = ts.M2_matrix()
        with man.stage("hessian"):
            level = maximize_lambda(op, tol=cfg.tolerances, check_convexity=False)
        out["hessian_lambda"] = level.hessian
        out["calibration_constant"] = 2.0
        out["proportionality_residual"] = float(
            np.linalg.norm(level.hessian + 2.0 * cell.Q) / np.linalg.norm(2.0 * cell.Q))
    man.write_json("homogenize.json", out)
    if cfg.params.get("dump_fields"):
        ng = psi.shape[0]
        grids = cell.Psi_grid(ng) or []
        pts = np.indices(psi.shape).reshape(op.n, -1).T / ng
        rows = [[float(v) for v in x] + [float(psi.reshape(-1)[i])]
                + [float(g.reshape(-1)[i]) for g in grids] for i, x in enumerate(pts)]
        man.write_csv("cell_fields.csv", [f"x{i + 1}" for i in range(op.n)] + ["psi"]
                      + [f"Psi{j + 1}" for j in range(len(grids))], rows)
    return 0


def cmd_liouville(cfg, man):
    from .cell import solve_cell
    from .liouville import VACUOUS, cross_check_dimensions, liouville_dimensions

    op = load_operator(cfg)
    with man.stage("dimensions"):
        report = liouville_dimensions(op, cfg.nmax, cfg.level, tol=cfg.tolerances)
    out = report.to_dict()
    if cfg.level == 0.0 and report.classification != "Infinite":
        with man.stage("cross_check"):
            try:
                cell = None if report.classification == VACUOUS else solve_cell(op, tol=cfg.tolerances)
                out["cross_check"] = cross_check_dimensions(op, report, cell, cfg.tolerances)
            except FloquetLabError as exc:
                out["cross_check"] = {"skipped": f"{type(exc).__name__}: {exc}"}
    man.write_json("liouville.json", out)
    print(json.dumps({"d": report.d, "classification": report.classification}))
    return 0


def cmd_synthesize(cfg, man):
    from .liouville import synthesize_from_measure

    op = load_operator(cfg)
    data = _json_arg(cfg.params["measure"])
    try:
        points = np.asarray(data["points"], dtype=float).reshape(-1, op.n)
        weights = [complex(w[0], w[1]) if isinstance(w, list) else complex(w)
                   for w in data["weights"]]
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"measure must be {{points, weights}}: {exc}") from exc
    with man.stage("synthesis"):
        synth = synthesize_from_measure(op, points, weights, tol=cfg.tolerances)
    lo, hi, count = cfg.params["box"]
    pts, vals = synth.sample(lo, hi, int(count))
    man.write_csv("synthesis.csv", [f"x{i + 1}" for i in range(op.n)] + ["re_u", "im_u"],
                  [[float(v) for v in x] + [float(u.real), float(u.imag)]
                   for x, u in zip(pts, vals)])
    man.write_json("synthesis.json", {"points": points, "weights": weights,
                                      "residual": synth.residual,
                                      "certificate": synth.certificate})
    return 0


def cmd_verify_all(cfg, man):
    from .acceptance import run_all

    with man.stage("acceptance"):
        results = run_all(only=cfg.params.get("only"), stream=sys.stdout)
    man.write_json("acceptance.json", [
        {"number": r.number, "name": r.name, "passed": r.passed, "detail": r.detail}
        for r in results
    ])
    total = sum(r.seconds for r in results)
    ok = all(r.passed for r in results)
    print(f"{sum(r.passed for r in results)}/{len(results)} criteria passed in {total:.1f}s")
    return 0 if ok else 3


HANDLERS = {
    "bands": cmd_bands,
    "lambda": cmd_lambda,
    "qharm": cmd_qharm,
    "homogenize": cmd_homogenize,
    "liouville": cmd_liouville,
    "synthesize": cmd_synthesize,
    "verify-all": cmd_verify_all,
}


def run(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        cfg = make_config(args)
        man = RunManifest(cfg, cfg.out)
        status = HANDLERS[args.command](cfg, man)
        man.finish()
        return status
    except ConfigError as exc:
        print(f"floquet-lab: configuration error: {exc}", file=sys.stderr)
        return 2
    except (FloquetLabError, np.linalg.LinAlgError, ArithmeticError) as exc:
        print(f"floquet-lab: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


def main():
    sys.exit(run())
