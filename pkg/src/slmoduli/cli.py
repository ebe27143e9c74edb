"""Batch front door: parse configs, dispatch to modules, emit reports.

Every run writes ``report.json`` into the output directory with one entry per
named claim key ("prop1", "prop2", "thm3", "prop3", "prop4", "prop5",
"mclean") that the command certifies, plus CSV field dumps.  Exit status: 0
if every asserted check passed, 1 if a check failed (the report is still
written), 2 for configuration or input errors.  Timestamps go to a sidecar
``run.log`` so that reports are byte-identical across reruns.
"""

import argparse
import datetime
import json
import sys
from pathlib import Path

import numpy as np

from . import family as fam_mod
from . import hessian as hes_mod
from . import semiflat as sf_mod
from .cymodel import load_model, std_model, validate_axioms
from .errors import InputError
from .family import (
    closedness_loop_residual,
    embed_F,
    family_from_shorthand,
    lagrangian_residual,
    load_family,
    moduli_coordinates,
    scan_to_csv,
    specialness_scan,
)
from .hessian import (
    HessianPotential,
    legendre_transform,
    load_potential,
    ma_residual,
    partial_legendre_2d,
    save_potential,
    solve_ma_dirichlet,
)
from .semiflat import (
    build_semiflat,
    gh_metric,
    holomorphic_norm_field,
    ricci_agreement,
    ricci_form,
)

COMMANDS = (
    "cy-validate",
    "family-scan",
    "embed",
    "legendre",
    "ma-solve",
    "partial-legendre",
    "semiflat",
    "gh",
)

_EXPR_NAMES = {
    "np": np,
    "pi": np.pi,
    "sin": np.sin,
    "cos": np.cos,
    "exp": np.exp,
    "cosh": np.cosh,
    "sinh": np.sinh,
    "sqrt": np.sqrt,
    "log": np.log,
    "abs": np.abs,
}


def _eval_expression(expr, **variables):
    try:
        return eval(expr, {"__builtins__": {}}, {**_EXPR_NAMES, **variables})
    except Exception as exc:
        raise InputError(f"cannot evaluate expression {expr!r}: {exc}") from exc


def _load_config(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot read config {path}: {exc}") from exc


def _resolve_family(spec):
    if isinstance(spec, str) and (spec.startswith("std:") or spec.startswith("tilt:")):
        return family_from_shorthand(spec), spec
    fam = load_family(spec)
    return fam, str(spec)


def _resolve_model(spec):
    if isinstance(spec, str) and spec.startswith("std:"):
        return std_model(int(spec.split(":")[1])), spec
    return load_model(spec), str(spec)


def _resolve_potential(spec):
    if isinstance(spec, dict):
        axes = [np.linspace(lo, hi, int(n)) for lo, hi, n in spec["axes"]]
        mesh = np.meshgrid(*axes, indexing="ij")
        names = {f"u{i + 1}": mesh[i] for i in range(len(mesh))}
        values = _eval_expression(spec["expr"], **names)
        return HessianPotential(axes, np.broadcast_to(values, mesh[0].shape).copy(),
                                spec.get("c"))
    return load_potential(spec)


def _check(residual, tol):
    residual = float(residual)
    return {"residual": residual, "tol": float(tol), "pass": bool(residual < tol)}


def run_cy_validate(config, tol, out):
    model, ref = _resolve_model(config.get("model", "std:2"))
    report = validate_axioms(model, tol=min(tol, 1e-10))
    return {"model": ref, "axioms": report.to_dict()}, report.all_passed


def run_family_scan(config, tol, out):
    fam, ref = _resolve_family(config.get("family", "std:2"))
    m = fam.moduli_dim
    grid = config.get("grid", {})
    n = int(grid.get("n", 5))
    ranges = grid.get("ranges", [[0.0, 1.0]] * m)
    axes = [np.linspace(lo, hi, n) for lo, hi in ranges]
    resolution = int(config.get("fiber_resolution", 16))
    torus = fam.fiber_torus(resolution)

    omega_res, omega1_res = fam.fiber_restriction_residuals()
    scan = specialness_scan(fam, axes, torus)
    scan_to_csv(scan, Path(out) / "scan.csv")
    pm = fam.period_matrices(torus=torus)
    mclean = [fam.mclean_check(None, j, torus) for j in range(m)]
    rng = np.random.default_rng(int(config.get("seed", 0)))
    loops = []
    for _ in range(int(config.get("loops", 10))):
        a = rng.uniform(0.0, 1.0, size=m)
        b = a + rng.uniform(0.1, 1.0, size=m)
        loop = [a.copy() for _ in range(5)]
        loop[1][0] = b[0]
        loop[2][0] = b[0]
        if m > 1:
            loop[2][1] = b[1]
            loop[3][1] = b[1]
        loops.append(closedness_loop_residual(fam.lambda_function(), np.array(loop)))
    checks = {
        "slag_restriction": _check(max(omega_res, omega1_res), tol),
        "mclean": _check(
            max(max(c["d_theta"], c["d_star_theta"], c["phi_minus_star_theta"])
                for c in mclean),
            tol,
        ),
        "prop1": _check(max(loops) if loops else 0.0, tol),
        "prop2": _check(fam.mclean_metric(torus=torus)[1], tol),
        "thm3": _check(lagrangian_residual(pm), max(tol, 1e-10)),
        "prop3": _check(
            max(scan["vol_h1_variation"], scan["vol_hn1_variation"],
                scan["vol_fiber_variation"]),
            tol,
        ),
    }
    report = {
        "family": ref,
        "P": fam.P.tolist(),
        "Q": fam.Q.tolist(),
        "lambda": pm.lam.tolist(),
        "mu": pm.mu.tolist(),
        "checks": checks,
    }
    return report, all(c["pass"] for c in checks.values())


def run_embed(config, tol, out):
    fam, ref = _resolve_family(config.get("family", "std:2"))
    m = fam.moduli_dim
    grid = config.get("grid", {})
    n = int(grid.get("n", 9))
    ranges = grid.get("ranges", [[0.0, 1.0]] * m)
    axes = [np.linspace(lo, hi, n) for lo, hi in ranges]
    chart = moduli_coordinates(fam, axes)
    table = embed_F(chart)
    flat = table.reshape(-1, 2 * m)
    pts = chart.points().reshape(-1, m)
    with open(Path(out) / "embedding.csv", "w") as fh:
        header = [f"t_{i + 1}" for i in range(m)]
        header += [f"u_{i + 1}" for i in range(m)] + [f"v_{i + 1}" for i in range(m)]
        fh.write(",".join(header) + "\n")
        for t, row in zip(pts, flat):
            fh.write(",".join(repr(float(x)) for x in list(t) + list(row)) + "\n")
    checks = {"thm3": _check(lagrangian_residual(fam.period_matrices()), max(tol, 1e-10))}
    return {"family": ref, "checks": checks}, checks["thm3"]["pass"]


def run_legendre(config, tol, out):
    pot = _resolve_potential(config["potential"])
    pair = legendre_transform(pot)
    save_potential(pair.dual, Path(out) / "dual.csv")
    back = legendre_transform(pair.dual, v_axes=pot.axes)
    involution = float(np.max(np.abs(back.dual.values - pot.values)))
    itol = 10.0 * hes_mod.interpolation_tolerance(pot)
    checks = {
        "legendre_involution": _check(involution, itol),
        "fenchel": _check(pair.pairing_residual, max(tol, 1e-8)),
    }
    return {"checks": checks}, all(c["pass"] for c in checks.values())


def run_ma_solve(config, tol, out):
    solver = config.get("solver", {})
    domain = config.get("domain", [[0.0, 1.0], [0.0, 1.0]])
    n = int(config.get("n", 65))
    axes = [np.linspace(lo, hi, n) for lo, hi in domain]
    expr = config.get("boundary", "(u1**2 + u2**2) / 2")
    mesh = np.meshgrid(*axes, indexing="ij")
    boundary = _eval_expression(expr, u1=mesh[0], u2=mesh[1])
    pot = solve_ma_dirichlet(
        axes,
        np.broadcast_to(boundary, mesh[0].shape).copy(),
        c=float(solver.get("c", 1.0)),
        tol=float(solver.get("tol", 1e-8)),
        max_iter=int(solver.get("max_iter", 50)),
        damping=float(solver.get("damping", 1.0)),
    )
    save_potential(pot, Path(out) / "solution.csv")
    interior = np.max(np.abs(ma_residual(pot, pot.c)[2:-2, 2:-2]))
    checks = {"prop3": _check(interior, max(tol, 1e-6))}
    return {
        "iterations": pot.info["iterations"],
        "residual_history": pot.info["residuals"],
        "checks": checks,
    }, checks["prop3"]["pass"]


def run_partial_legendre(config, tol, out):
    pot = _resolve_potential(config["potential"])
    result = partial_legendre_2d(pot)
    coarse_pot = HessianPotential(
        [ax[::2] for ax in pot.axes], pot.values[::2, ::2], pot.c
    )
    coarse = partial_legendre_2d(coarse_pot)
    stencil_tol = 10.0 * max(coarse["laplace_residual"] / 16.0, 1e-10)
    checks = {"prop3": _check(result["laplace_residual"], stencil_tol)}
    return {
        "laplace_residual": result["laplace_residual"],
        "coarse_residual": coarse["laplace_residual"],
        "checks": checks,
    }, checks["prop3"]["pass"]


def run_semiflat(config, tol, out, oracle=False):
    pot = _resolve_potential(config["potential"])
    sf = build_semiflat(pot)
    norm = holomorphic_norm_field(sf)
    ric = ricci_form(sf)
    trim = sf_mod._interior_slice(pot, 3)
    ricci_max = float(np.max(np.abs(ric[trim])))
    c = pot.c if pot.c is not None else 1.0
    ma_max = float(np.max(np.abs(ma_residual(pot, c)[trim[:pot.dim]])))
    norm_tol = max(tol, 1e-6)
    checks = {
        "prop4": _check(sf.kahler_residual, max(tol, 1e-10)),
        "prop5": _check(norm["variation"], norm_tol),
        "ricci_flat": _check(ricci_max, norm_tol),
    }
    report = {
        "ma_residual_max": ma_max,
        "norm_variation": norm["variation"],
        "ricci_max": ricci_max,
        "kahler_residual": sf.kahler_residual,
        "checks": checks,
    }
    if oracle:
        agreement = ricci_agreement(sf)
        coarse_pot = HessianPotential(
            [ax[::2] for ax in pot.axes],
            pot.values[tuple(slice(None, None, 2) for _ in pot.axes)],
            pot.c,
        )
        coarse_agreement = ricci_agreement(build_semiflat(coarse_pot))
        oracle_tol = 10.0 * max(coarse_agreement / 16.0, 1e-8)
        checks["ricci_oracle"] = _check(agreement, oracle_tol)
        report["ricci_oracle_agreement"] = agreement
        report["ricci_oracle_coarse"] = coarse_agreement
    return report, all(c["pass"] for c in checks.values())


def run_gh(config, tol, out):
    domain = config.get("domain", [[0.0, 1.0], [0.0, 1.0]])
    n = int(config.get("n", 33))
    axes = [np.linspace(lo, hi, n) for lo, hi in domain]
    mesh = np.meshgrid(*axes, indexing="ij")
    v = _eval_expression(config.get("V", "2 + y1"), y1=mesh[0], y2=mesh[1])
    gh = gh_metric(np.broadcast_to(v, mesh[0].shape).copy(), axes, tol=max(tol, 1e-8))
    checks = {"ricci_flat": _check(gh.ricci_max, max(tol, 1e-4))}
    return {
        "harmonic_residual": gh.harmonic_residual,
        "ricci_max": gh.ricci_max,
        "checks": checks,
    }, checks["ricci_flat"]["pass"]


_RUNNERS = {
    "cy-validate": run_cy_validate,
    "family-scan": run_family_scan,
    "embed": run_embed,
    "legendre": run_legendre,
    "ma-solve": run_ma_solve,
    "partial-legendre": run_partial_legendre,
    "semiflat": run_semiflat,
    "gh": run_gh,
}


def build_parser():
    parser = argparse.ArgumentParser(
        prog="slmoduli",
        description="Special Lagrangian moduli toolkit, batch interface",
    )
    parser.add_argument("command", choices=COMMANDS)
    parser.add_argument("--config", type=str, default=None, help="JSON config path")
    parser.add_argument("--tol", type=float, default=1e-8,
                        help="residual tolerance override")
    parser.add_argument("--out", type=str, default=".", help="output directory")
    parser.add_argument("--oracle", action="store_true",
                        help="enable the Christoffel Ricci cross-check")
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        if args.tol <= 0:
            raise InputError("tolerance must be positive")
        config = _load_config(args.config) if args.config else {}
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        runner = _RUNNERS[args.command]
        if args.command == "semiflat":
            report, ok = runner(config, args.tol, out, oracle=args.oracle)
        else:
            report, ok = runner(config, args.tol, out)
    except (InputError, FileNotFoundError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    report = {"command": args.command, "tol": args.tol, **report}
    with open(out / "report.json", "w") as fh:
        json.dump(report, fh, indent=2, sort_keys=True)
        fh.write("\n")
    with open(out / "run.log", "a") as fh:
        stamp = datetime.datetime.now(datetime.timezone.utc).isoformat()
        fh.write(f"{stamp} {args.command} exit={0 if ok else 1}\n")
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
