"""Command line front end for meshing, assembly, solving and studies.

Every subcommand prints a JSON document to stdout (or writes files under
--out) stamped with version, seed and tolerances, so studies can be rerun
bit for bit.
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from .assembly import assemble, export_matrix_market
from .meshes import generate_structured, mesh_stats, write_mesh
from .regularization import DEFAULT_SEED, W_KINDS, build_regularization
from .experiments import (
    SolverConfig,
    alpha_order_study,
    convergence_study,
    iteration_table,
    manufactured_case,
    provenance,
    solve_regularized,
    write_report_json,
    write_table_csv,
)
from . import spectral

LEMMA_NAMES = {
    "schur-finite": "L_SCHUR_FINITE",
    "saddle-finite": "L_SADDLE_FINITE",
    "schur-small": "L_SCHUR_SMALL",
    "saddle-small": "L_SADDLE_SMALL",
}


def _rho_arg(text):
    if text == "auto":
        return "auto"
    val = float(text)
    if val <= 0:
        raise argparse.ArgumentTypeError("rho must be positive or 'auto'")
    return val


def _mesh_flags(p, default_n=8):
    p.add_argument("--dim", type=int, default=2, choices=[2, 3])
    p.add_argument("--n", type=int, default=default_n, help="cells per side")


def _reg_flags(p):
    p.add_argument("--w", default="ones", choices=list(W_KINDS))
    p.add_argument("--rho", type=_rho_arg, default="auto")
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)


def _solver_flags(p):
    p.add_argument("--solver", default="minres", choices=["minres", "gmres"])
    p.add_argument("--precond", default=None, choices=["diag", "tri"])
    p.add_argument("--tol", type=float, default=None,
                   help="outer relative tolerance (default 1e-9 2D, 1e-8 3D)")
    p.add_argument("--restart", type=int, default=30)
    p.add_argument("--maxit", type=int, default=1000)
    p.add_argument("--inner-tol", type=float, default=1e-10)
    p.add_argument("--ichol-drop", type=float, default=1e-3)


def _emit(obj, out, seed=None, tolerances=None):
    if out:
        write_report_json(out, obj, seed=seed, tolerances=tolerances)
        print(out)
    else:
        payload = {"provenance": provenance(seed=seed, tolerances=tolerances)}
        payload.update(obj)
        json.dump(payload, sys.stdout, indent=2, default=_np_default)
        print()


def _np_default(o):
    if isinstance(o, np.ndarray):
        return o.tolist()
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, np.bool_):
        return bool(o)
    raise TypeError(f"cannot serialize {type(o)!r}")


def _config_from(args, dim):
    cfg = SolverConfig(
        solver=args.solver,
        precond=args.precond,
        tol=args.tol,
        maxiter=args.maxit,
        restart=args.restart,
        inner_tol=args.inner_tol,
        ichol_drop=args.ichol_drop,
    )
    return cfg, cfg.to_dict(dim)


def cmd_mesh(args):
    mesh = generate_structured(args.dim, args.n)
    if args.out:
        write_mesh(mesh, args.out)
        print(args.out)
    else:
        json.dump(mesh_stats(mesh), sys.stdout, indent=2, default=_np_default)
        print()


def cmd_assemble(args):
    mesh = generate_structured(args.dim, args.n)
    case = manufactured_case(args.dim, args.mu)
    system = assemble(mesh, args.mu, case.body_force, case.boundary,
                      boundary_rule=args.brule)
    info = {
        "dim": args.dim,
        "n": args.n,
        "mu": args.mu,
        "boundary_rule": args.brule,
        "n_velocity": system.n_velocity,
        "n_pressure": system.n_pressure,
        "alpha": float(np.sum(system.b2)),
        "nnz_A_scalar": int(system.A_scalar.nnz),
        "nnz_B": int(system.B.nnz),
    }
    if args.export_mm:
        os.makedirs(args.export_mm, exist_ok=True)
        info["exported"] = export_matrix_market(system, args.export_mm)
    _emit(info, args.out)


def cmd_solve(args):
    mesh = generate_structured(args.dim, args.n)
    case = manufactured_case(args.dim, args.mu)
    system = assemble(mesh, args.mu, case.body_force, case.boundary)
    reg = build_regularization(args.w, mesh, rho=args.rho, seed=args.seed)
    cfg, cfg_dict = _config_from(args, args.dim)
    _, _, report = solve_regularized(system, reg, cfg)
    out = {
        "problem": {
            "dim": args.dim, "n": args.n, "mu": args.mu,
            "w": args.w, "rho": reg.rho,
            "n_velocity": system.n_velocity,
            "n_pressure": system.n_pressure,
        },
        "report": report.to_dict(),
    }
    _emit(out, args.out, seed=args.seed, tolerances=cfg_dict)


def cmd_convergence(args):
    case = manufactured_case(args.dim, args.mu)
    cfg, cfg_dict = _config_from(args, args.dim)
    study = convergence_study(case, args.ns, w_kind=args.w, rho=args.rho, config=cfg)
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        write_report_json(os.path.join(args.out, "report.json"), study,
                          seed=args.seed, tolerances=cfg_dict)
        csv_path = os.path.join(args.out, "table.csv")
        with open(csv_path, "w") as fh:
            fh.write(f"# provenance={json.dumps(provenance(args.seed, cfg_dict))}\n")
            keys = list(study["errors"])
            fh.write("h," + ",".join(keys) + ",iterations\n")
            for i, h in enumerate(study["h"]):
                vals = [f"{study['errors'][k][i]:.6e}" for k in keys]
                fh.write(f"{h:.6e}," + ",".join(vals) + f",{study['iterations'][i]}\n")
        print(args.out)
    else:
        _emit(study, None, seed=args.seed, tolerances=cfg_dict)


def cmd_tables(args):
    cfg, cfg_dict = _config_from(args, args.dim)
    table = iteration_table(
        args.dim, args.ns, args.w_kinds, args.mu_list,
        solver=args.solver, precond=args.precond, config=cfg, jobs=args.jobs,
    )
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        write_table_csv(os.path.join(args.out, "table.csv"), table, seed=args.seed)
        write_report_json(os.path.join(args.out, "report.json"), table,
                          seed=args.seed, tolerances=cfg_dict)
        print(args.out)
    else:
        slim = dict(table)
        slim["rows"] = [
            {k: v for k, v in row.items() if k != "histories"}
            for row in table["rows"]
        ]
        _emit(slim, None, seed=args.seed, tolerances=cfg_dict)


def cmd_alpha_order(args):
    case = manufactured_case(args.dim, 1.0)
    study = alpha_order_study(case.boundary, args.brule, args.ns, dim=args.dim)
    _emit(study, args.out)


def cmd_spectrum(args):
    mesh = generate_structured(args.dim, args.n)
    case = manufactured_case(args.dim, args.mu)
    system = assemble(mesh, args.mu, case.body_force, case.boundary)
    reg = build_regularization(args.w, mesh, rho=args.rho, seed=args.seed)
    report = spectral.verify_lemma(
        LEMMA_NAMES[args.lemma], system, reg, variant=args.variant
    )
    _emit(report.to_dict(), args.out, seed=args.seed)


def build_parser():
    ap = argparse.ArgumentParser(
        prog="wgstokes",
        description="Weak Galerkin Stokes solver and preconditioner test bench",
    )
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("mesh", help="generate a structured simplex mesh")
    _mesh_flags(p)
    p.add_argument("--out", default=None, help="mesh file (stats to stdout if absent)")
    p.set_defaults(func=cmd_mesh)

    p = sub.add_parser("assemble", help="assemble the saddle system blocks")
    _mesh_flags(p)
    p.add_argument("--mu", type=float, default=1.0)
    p.add_argument("--brule", default="mid", choices=["mid", "gauss2", "gauss3"])
    p.add_argument("--export-mm", default=None, metavar="DIR",
                   help="write A, B, Mp, b1, b2 in Matrix Market format")
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_assemble)

    p = sub.add_parser("solve", help="solve one regularized problem")
    _mesh_flags(p, default_n=16)
    p.add_argument("--mu", type=float, default=1.0)
    _reg_flags(p)
    _solver_flags(p)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_solve)

    p = sub.add_parser("convergence", help="refinement study of error norms")
    p.add_argument("--dim", type=int, default=2, choices=[2, 3])
    p.add_argument("--mu", type=float, default=1.0)
    p.add_argument("--ns", type=int, nargs="+", default=[8, 16, 32, 64])
    _reg_flags(p)
    _solver_flags(p)
    p.add_argument("--out", default=None, metavar="DIR")
    p.set_defaults(func=cmd_convergence)

    p = sub.add_parser("tables", help="iteration-count tables over meshes")
    p.add_argument("--dim", type=int, default=2, choices=[2, 3])
    p.add_argument("--ns", type=int, nargs="+", default=[11, 21, 43, 86])
    p.add_argument("--w-kinds", nargs="+", default=["ones", "mass", "pin", "random"],
                   choices=list(W_KINDS))
    p.add_argument("--mu-list", type=float, nargs="+", default=[1.0, 1e-4])
    p.add_argument("--jobs", type=int, default=1)
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    _solver_flags(p)
    p.add_argument("--out", default=None, metavar="DIR")
    p.set_defaults(func=cmd_tables)

    p = sub.add_parser("alpha-order", help="decay order of the boundary flux defect")
    p.add_argument("--dim", type=int, default=2, choices=[2, 3])
    p.add_argument("--brule", default="mid", choices=["mid", "gauss2", "gauss3"])
    p.add_argument("--ns", type=int, nargs="+", default=[4, 8, 16, 32])
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_alpha_order)

    p = sub.add_parser("spectrum", help="dense verification of an eigenvalue lemma")
    _mesh_flags(p, default_n=4)
    p.add_argument("--mu", type=float, default=1.0)
    _reg_flags(p)
    p.add_argument("--variant", default=None, choices=["augmented", "plain"])
    p.add_argument("--lemma", default="schur-finite", choices=sorted(LEMMA_NAMES))
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_spectrum)

    return ap


def main(argv=None):
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    main()
