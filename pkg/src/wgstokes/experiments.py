"""Manufactured-solution studies: errors, convergence orders, solver tables.

The drivers here glue the assembly, regularization and Krylov layers
together for reproducible numerical studies.  All outputs carry enough
metadata (version, seed, tolerances) to rerun them exactly.
"""

from __future__ import annotations

import csv
import json
import subprocess
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .assembly import _batched_local_data, assemble, compute_alpha
from .krylov import gmres, minres
from .meshes import generate_structured
from .quadrature import simplex_rule
from .regularization import RegularizedOperator, build_regularization
from .schur import make_preconditioner


@dataclass
class ManufacturedCase:
    """Analytic Stokes solution with its source term for a given viscosity.

    velocity/pressure/velocity_gradient/body_force are vectorized over a
    trailing coordinate axis: x has shape (..., dim).
    """

    name: str
    dim: int
    mu: float
    velocity: callable
    pressure: callable
    velocity_gradient: callable
    body_force: callable

    @property
    def boundary(self):
        return self.velocity

    def self_check(self, n_points=20, step=0.02, seed=1234):
        """Finite-difference audit of the coded fields.

        Checks the momentum balance (body_force against -mu*lap(u) + grad p
        of the coded velocity/pressure), the coded gradient, and exact
        incompressibility via the gradient trace.  Guards against
        transcription errors in the analytic formulas.
        """
        rng = np.random.default_rng(seed)
        pts = rng.uniform(0.1, 0.9, size=(n_points, self.dim))
        c1 = np.array([1.0, -8.0, 0.0, 8.0, -1.0]) / 12.0  # first derivative
        c2 = np.array([-1.0, 16.0, -30.0, 16.0, -1.0]) / 12.0  # second
        offs = np.arange(-2, 3)

        lap = np.zeros((n_points, self.dim))
        grad_fd = np.zeros((n_points, self.dim, self.dim))
        grad_p = np.zeros((n_points, self.dim))
        for j in range(self.dim):
            shifted = pts[:, None, :].repeat(5, axis=1)
            shifted[:, :, j] += offs * step
            flat = shifted.reshape(-1, self.dim)
            uv = np.asarray(self.velocity(flat)).reshape(n_points, 5, self.dim)
            pv = np.asarray(self.pressure(flat)).reshape(n_points, 5)
            lap += np.einsum("s,nsk->nk", c2, uv) / step**2
            grad_fd[:, :, j] = np.einsum("s,nsk->nk", c1, uv) / step
            grad_p[:, j] = pv @ c1 / step

        f_fd = -self.mu * lap + grad_p
        f_coded = np.asarray(self.body_force(pts))
        scale = max(1.0, np.abs(f_coded).max())
        grad_coded = np.asarray(self.velocity_gradient(pts))
        gscale = max(1.0, np.abs(grad_coded).max())
        div = np.trace(grad_coded, axis1=-2, axis2=-1)
        return {
            "momentum_rel_err": float(np.abs(f_fd - f_coded).max() / scale),
            "gradient_rel_err": float(np.abs(grad_fd - grad_coded).max() / gscale),
            "divergence_max": float(np.abs(div).max()),
        }


def stokes_case_2d(mu):
    """Smooth solution on the unit square with exponential/trig structure."""

    def velocity(x):
        ex = np.exp(x[..., 0])
        y = x[..., 1]
        return np.stack(
            [-ex * (y * np.cos(y) + np.sin(y)), ex * y * np.sin(y)], axis=-1
        )

    def pressure(x):
        return 2.0 * np.exp(x[..., 0]) * np.sin(x[..., 1])

    def velocity_gradient(x):
        ex = np.exp(x[..., 0])
        y = x[..., 1]
        g = np.empty(x.shape[:-1] + (2, 2))
        g[..., 0, 0] = -ex * (y * np.cos(y) + np.sin(y))
        g[..., 0, 1] = -ex * (2.0 * np.cos(y) - y * np.sin(y))
        g[..., 1, 0] = ex * y * np.sin(y)
        g[..., 1, 1] = ex * (np.sin(y) + y * np.cos(y))
        return g

    def body_force(x):
        ex = np.exp(x[..., 0])
        y = x[..., 1]
        return 2.0 * (1.0 - mu) * ex[..., None] * np.stack(
            [np.sin(y), np.cos(y)], axis=-1
        )

    return ManufacturedCase(
        "exp-trig-2d", 2, mu, velocity, pressure, velocity_gradient, body_force
    )


def stokes_case_3d(mu):
    """Smooth solution on the unit cube (trigonometric pattern)."""
    pi = np.pi

    def velocity(x):
        sx = np.sin(pi * x[..., 0])
        cx = np.cos(pi * x[..., 0])
        return np.stack(
            [2.0 * sx, -pi * x[..., 1] * cx, -pi * x[..., 2] * cx], axis=-1
        )

    def pressure(x):
        return (
            np.sin(pi * x[..., 0]) * np.cos(pi * x[..., 1]) * np.sin(pi * x[..., 2])
        )

    def velocity_gradient(x):
        sx = np.sin(pi * x[..., 0])
        cx = np.cos(pi * x[..., 0])
        g = np.zeros(x.shape[:-1] + (3, 3))
        g[..., 0, 0] = 2.0 * pi * cx
        g[..., 1, 0] = pi**2 * x[..., 1] * sx
        g[..., 1, 1] = -pi * cx
        g[..., 2, 0] = pi**2 * x[..., 2] * sx
        g[..., 2, 2] = -pi * cx
        return g

    def body_force(x):
        sx, cx = np.sin(pi * x[..., 0]), np.cos(pi * x[..., 0])
        sy, cy = np.sin(pi * x[..., 1]), np.cos(pi * x[..., 1])
        sz, cz = np.sin(pi * x[..., 2]), np.cos(pi * x[..., 2])
        return np.stack(
            [
                2.0 * mu * pi**2 * sx + pi * cx * cy * sz,
                -mu * pi**3 * x[..., 1] * cx - pi * sx * sy * sz,
                -mu * pi**3 * x[..., 2] * cx + pi * sx * cy * cz,
            ],
            axis=-1,
        )

    return ManufacturedCase(
        "trig-3d", 3, mu, velocity, pressure, velocity_gradient, body_force
    )


def manufactured_case(dim, mu):
    if dim == 2:
        return stokes_case_2d(mu)
    if dim == 3:
        return stokes_case_3d(mu)
    raise ValueError(f"no manufactured case for dim={dim}")


@dataclass
class SolverConfig:
    """Outer/inner solver settings for one regularized solve."""

    solver: str = "minres"  # minres | gmres
    precond: str | None = None  # diag | tri, default by solver
    tol: float | None = None  # default 1e-9 in 2D, 1e-8 in 3D
    maxiter: int = 1000
    restart: int = 30
    inner_tol: float = 1e-10
    inner_maxiter: int = 2000
    ichol_drop: float = 1e-3

    def resolved(self, dim):
        precond = self.precond or ("diag" if self.solver == "minres" else "tri")
        tol = self.tol if self.tol is not None else (1e-9 if dim == 2 else 1e-8)
        return precond, tol

    def to_dict(self, dim=2):
        precond, tol = self.resolved(dim)
        return {
            "solver": self.solver,
            "precond": precond,
            "tol": tol,
            "maxiter": self.maxiter,
            "restart": self.restart,
            "inner_tol": self.inner_tol,
            "inner_maxiter": self.inner_maxiter,
            "ichol_drop": self.ichol_drop,
        }


def solve_regularized(system, reg, config=None):
    """Krylov solve of the rescaled regularized system.

    Returns (u, p, report) with the velocity already un-rescaled back to
    physical units (the solve works on mu*u).
    """
    config = config or SolverConfig()
    precond, tol = config.resolved(system.mesh.dim)
    op = RegularizedOperator(system, reg)
    P = make_preconditioner(
        system,
        reg,
        kind=precond,
        inner_tol=config.inner_tol,
        inner_maxiter=config.inner_maxiter,
        ichol_drop=config.ichol_drop,
    )
    b = op.rhs()
    if config.solver == "minres":
        x, report = minres(op.apply, b, M=P.apply, tol=tol, maxiter=config.maxiter)
    elif config.solver == "gmres":
        x, report = gmres(
            op.apply, b, M=P.apply, tol=tol, maxiter=config.maxiter,
            restart=config.restart,
        )
    else:
        raise ValueError(f"unknown solver {config.solver!r}")
    report.inner_iterations = P.stats.iterations
    nu = system.n_velocity
    u = x[:nu] / system.mu
    p = x[nu:]
    return u, p, report


@dataclass
class ErrorReport:
    """Discretization errors of one solve against the analytic fields."""

    h: float
    n_pressure: int
    pressure_l2: float
    velocity_l2: float
    weak_gradient_l2: float
    projected_velocity_l2: float
    alpha: float
    projection_identity_residual: float
    converged: bool = True
    orders: dict | None = None

    def to_dict(self):
        out = {
            "h": self.h,
            "n_pressure": self.n_pressure,
            "pressure_l2": self.pressure_l2,
            "velocity_l2": self.velocity_l2,
            "weak_gradient_l2": self.weak_gradient_l2,
            "projected_velocity_l2": self.projected_velocity_l2,
            "alpha": self.alpha,
            "projection_identity_residual": self.projection_identity_residual,
            "converged": self.converged,
        }
        if self.orders is not None:
            out["orders"] = self.orders
        return out


def _element_quadrature(mesh, degree_n=3):
    """Physical quadrature points (ne, nq, d) and reference weights."""
    ref_pts, ref_w = simplex_rule(mesh.dim, degree_n)
    v = mesh.vertices[mesh.elements]
    origin = v[:, 0, :]
    span = v[:, 1:, :] - origin[:, None, :]
    pts = origin[:, None, :] + np.einsum("qr,nrk->nqk", ref_pts, span)
    return pts, ref_w


def compute_errors(system, case, u, p):
    """L2-type error norms of a discrete solution.

    Pressure is compared after aligning both discrete and exact fields to
    zero volume mean (the regularization fixes an arbitrary gauge).  The
    weak gradient error evaluates the elementwise reconstruction, with
    boundary facets taking the projected Dirichlet data.
    """
    mesh = system.mesh
    d = mesh.dim
    ne = mesh.n_elements
    meas = mesh.element_measures
    omega = mesh.domain_measure()
    pts, ref_w = _element_quadrature(mesh)
    flat = pts.reshape(-1, d)

    u_ex = np.asarray(case.velocity(flat)).reshape(ne, -1, d)
    p_ex = np.asarray(case.pressure(flat)).reshape(ne, -1)
    g_ex = np.asarray(case.velocity_gradient(flat)).reshape(ne, -1, d, d)

    # pressure, both sides shifted to zero mean
    p_h = p - (meas @ p) / omega
    p_ex_mean = (meas @ (p_ex @ ref_w)) / omega
    dp = (p_ex - p_ex_mean) - p_h[:, None]
    err_p = np.sqrt(np.sum(meas * ((dp**2) @ ref_w)))

    # interior velocity values: component c of cell e is u[c*n_scalar + e]
    ns = system.dofmap.n_scalar
    u_cells = np.stack([u[c * ns : c * ns + ne] for c in range(d)], axis=1)
    du = u_ex - u_cells[:, None, :]
    err_u = np.sqrt(np.sum(meas * np.einsum("nqk,nqk,q->n", du, du, ref_w)))

    # cell averages of the exact velocity (superconvergent comparison)
    u_bar = np.einsum("nqk,q->nk", u_ex, ref_w)
    dbar = u_bar - u_cells
    err_proj = np.sqrt(np.sum(meas * np.einsum("nk,nk->n", dbar, dbar)))

    # weak gradient reconstruction per element and component
    data = _batched_local_data(mesh)
    W, fids = data["W"], data["fids"]
    sdof = system.dofmap.scalar_facet_dof(fids)  # (ne, d+1), -1 on boundary
    bidx = system.dofmap.boundary_index[fids]
    loc = np.empty((ne, d, d + 2))
    for c in range(d):
        loc[:, c, 0] = u_cells[:, c]
        fv = np.where(sdof >= 0, u[c * ns + np.maximum(sdof, 0)], 0.0)
        bv = np.where(bidx >= 0, system.boundary_values[np.maximum(bidx, 0), c], 0.0)
        loc[:, c, 1:] = np.where(sdof >= 0, fv, bv)
    coef = np.einsum("nij,ncj->nci", W, loc)  # (ne, c, d+1): a then b
    rel = pts - mesh.centroids[:, None, :]
    wg = coef[:, None, :, :d] + coef[:, None, :, d : d + 1] * rel[:, :, None, :]
    dG = g_ex - wg
    err_g = np.sqrt(np.sum(meas * np.einsum("nqck,nqck,q->n", dG, dG, ref_w)))

    return err_p, err_u, err_g, err_proj


def run_case(case, mesh, w_kind="ones", rho="auto", config=None, seed=None):
    """Assemble, regularize, solve and measure errors for one mesh.

    Returns (ErrorReport, SolveReport).  A non-converged solve is flagged
    but the errors are still computed from the returned iterate.
    """
    from .regularization import DEFAULT_SEED

    config = config or SolverConfig()
    system = assemble(mesh, case.mu, case.body_force, case.boundary)
    reg = build_regularization(
        w_kind, mesh, rho=rho, seed=DEFAULT_SEED if seed is None else seed
    )
    u, p, report = solve_regularized(system, reg, config)

    alpha = float(np.sum(system.b2))
    # discrete compatibility identity tying w^T p to the boundary flux defect
    lhs = -(reg.rho / system.mu) * float(reg.w @ p)
    rhs_val = alpha / float(reg.w @ np.ones(system.n_pressure))
    proj_res = abs(lhs - rhs_val)

    err_p, err_u, err_g, err_proj = compute_errors(system, case, u, p)
    err = ErrorReport(
        h=mesh.h,
        n_pressure=system.n_pressure,
        pressure_l2=err_p,
        velocity_l2=err_u,
        weak_gradient_l2=err_g,
        projected_velocity_l2=err_proj,
        alpha=alpha,
        projection_identity_residual=proj_res,
        converged=report.converged,
    )
    return err, report


def _lsq_order(hs, errs):
    """Least-squares slope of log(err) against log(h)."""
    hs = np.asarray(hs, dtype=float)
    errs = np.maximum(np.asarray(errs, dtype=float), 1e-300)
    return float(np.polyfit(np.log(hs), np.log(errs), 1)[0])


ERROR_KEYS = ("pressure_l2", "velocity_l2", "weak_gradient_l2", "projected_velocity_l2")


def convergence_study(case, ns, w_kind="ones", rho="auto", config=None):
    """Errors and observed orders over a family of structured meshes."""
    reports = []
    for n in ns:
        mesh = generate_structured(case.dim, n)
        err, solve_rep = run_case(case, mesh, w_kind=w_kind, rho=rho, config=config)
        reports.append((err, solve_rep))
    hs = [e.h for e, _ in reports]
    out = {
        "case": case.name,
        "mu": case.mu,
        "w": w_kind,
        "rho": rho if rho != "auto" else "auto",
        "ns": list(ns),
        "h": hs,
        "errors": {k: [getattr(e, k) for e, _ in reports] for k in ERROR_KEYS},
        "iterations": [r.iterations for _, r in reports],
        "converged": all(r.converged for _, r in reports),
        "alpha": [e.alpha for e, _ in reports],
    }
    out["orders"] = {k: _lsq_order(hs, out["errors"][k]) for k in ERROR_KEYS}
    out["orders_successive"] = {
        k: [
            float(np.log(v[i] / v[i + 1]) / np.log(hs[i] / hs[i + 1]))
            for i in range(len(v) - 1)
        ]
        for k, v in out["errors"].items()
    }
    return out


def iteration_table(
    dim,
    ns,
    w_kinds,
    mu_list,
    solver="minres",
    precond=None,
    rho=None,
    config=None,
    jobs=1,
):
    """Iteration counts over meshes for each (w, mu) configuration.

    Returns a dict with one row per (w, mu) and one column per mesh,
    mirroring the usual presentation of preconditioned solver studies.
    rho defaults to the regime rule of each w kind.
    """
    base = config or SolverConfig(solver=solver, precond=precond)
    if base.solver != solver or precond is not None:
        base = SolverConfig(
            solver=solver, precond=precond, tol=base.tol, maxiter=base.maxiter,
            restart=base.restart, inner_tol=base.inner_tol,
            inner_maxiter=base.inner_maxiter, ichol_drop=base.ichol_drop,
        )

    meshes = [generate_structured(dim, n) for n in ns]
    sizes = [m.n_elements for m in meshes]

    def one(args):
        mesh, mu, w_kind = args
        case = manufactured_case(dim, mu)
        t0 = time.perf_counter()
        system = assemble(mesh, mu, case.body_force, case.boundary)
        reg = build_regularization(w_kind, mesh, rho="auto" if rho is None else rho)
        _, _, report = solve_regularized(system, reg, base)
        return report, time.perf_counter() - t0

    tasks = [
        (mesh, mu, w) for w in w_kinds for mu in mu_list for mesh in meshes
    ]
    if jobs > 1:
        with ThreadPoolExecutor(max_workers=jobs) as pool:
            results = list(pool.map(one, tasks))
    else:
        results = [one(t) for t in tasks]

    rows = []
    it = iter(results)
    for w in w_kinds:
        for mu in mu_list:
            cells = [next(it) for _ in meshes]
            rows.append(
                {
                    "w": w,
                    "mu": mu,
                    "iterations": [r.iterations for r, _ in cells],
                    "converged": [bool(r.converged) for r, _ in cells],
                    "wall_times": [round(t, 4) for _, t in cells],
                    "histories": [r.history for r, _ in cells],
                }
            )
    return {
        "dim": dim,
        "ns": list(ns),
        "n_pressure": sizes,
        "solver": base.solver,
        "config": base.to_dict(dim),
        "rows": rows,
    }


def alpha_order_study(g, boundary_rule, ns, dim=2, tiny=1e-14):
    """Least-squares slope of log|alpha_h| against log h.

    Returns slope None (not applicable) when the compatibility defect is
    at rounding level on every mesh, e.g. for affine boundary data.
    """
    hs, alphas = [], []
    for n in ns:
        mesh = generate_structured(dim, n)
        hs.append(mesh.h)
        alphas.append(compute_alpha(mesh, g, boundary_rule))
    if max(abs(a) for a in alphas) < tiny:
        return {"slope": None, "h": hs, "alpha": alphas, "rule": boundary_rule}
    slope = _lsq_order(hs, [abs(a) for a in alphas])
    return {"slope": slope, "h": hs, "alpha": alphas, "rule": boundary_rule}


# -- provenance and writers ---------------------------------------------------


def provenance(seed=None, tolerances=None):
    """Version/seed/tolerance stamp embedded in every output file."""
    version = __version__
    try:
        desc = subprocess.run(
            ["git", "describe", "--always", "--dirty"],
            capture_output=True, text=True, timeout=5,
        )
        if desc.returncode == 0:
            version = f"{__version__}+{desc.stdout.strip()}"
    except (OSError, subprocess.TimeoutExpired):
        pass
    from .regularization import DEFAULT_SEED

    return {
        "version": version,
        "seed": DEFAULT_SEED if seed is None else seed,
        "tolerances": tolerances or {},
    }


def write_table_csv(path, table, seed=None):
    """Iteration table as CSV with provenance in comment lines."""
    prov = provenance(seed=seed, tolerances=table.get("config", {}))
    with open(path, "w", newline="") as fh:
        for key, val in prov.items():
            fh.write(f"# {key}={json.dumps(val)}\n")
        writer = csv.writer(fh)
        writer.writerow(["w", "mu"] + [f"N={n}" for n in table["n_pressure"]])
        for row in table["rows"]:
            writer.writerow([row["w"], row["mu"]] + row["iterations"])
    return path


def write_report_json(path, obj, seed=None, tolerances=None):
    """Full JSON report (histories included) with provenance."""
    payload = {"provenance": provenance(seed=seed, tolerances=tolerances)}
    payload.update(obj)

    def default(o):
        if isinstance(o, np.ndarray):
            return o.tolist()
        if isinstance(o, (np.floating, np.integer)):
            return o.item()
        if isinstance(o, (np.bool_,)):
            return bool(o)
        raise TypeError(f"cannot serialize {type(o)!r}")

    with open(path, "w") as fh:
        json.dump(payload, fh, indent=2, default=default)
    return path
