"""Mesh- and viscosity-robust iteration counts, and the residual bounds.

Reproduces the headline experiment: iteration counts of preconditioned
MINRES (block diagonal) and GMRES (block triangular) across a dyadic mesh
family, for a finite-overlap weighting (ones) and the pinning weighting.
With finite overlap the counts are flat in both the mesh size and the
viscosity.  Pinning shrinks gamma^2 N rho with refinement, so its counts
creep up exactly as the spectral picture predicts, yet stay moderate.
Afterwards one configuration is checked against the evaluated residual
bound: the observed preconditioned residual must sit below the bound at
every iteration.
"""
import numpy as np

from wgstokes import assemble, build_regularization, generate_structured, minres
from wgstokes.experiments import iteration_table, manufactured_case
from wgstokes.regularization import RegularizedOperator
from wgstokes.schur import make_preconditioner
from wgstokes.spectral import minres_bound_finite, spectral_constants


def show(table):
    ns = table["ns"]
    print(f"{table['solver']} iterations, dim {table['dim']}, "
          f"N = {table['n_pressure']}")
    print("  w      mu     " + "".join(f"  n={n:<4d}" for n in ns))
    for row in table["rows"]:
        counts = "".join(f"  {it:<6d}" for it in row["iterations"])
        flag = "" if all(row["converged"]) else "  (!)"
        print(f"  {row['w']:<6s} {row['mu']:<7g}{counts}{flag}")
    print()


def main():
    ns = (8, 16, 32, 64)
    mus = (1.0, 1e-4)
    for solver in ("minres", "gmres"):
        show(iteration_table(2, ns, ("ones", "pin"), mus, solver=solver))

    # evaluated bound vs observed history for one finite-overlap solve
    mesh = generate_structured(2, 16)
    case = manufactured_case(2, 1.0)
    system = assemble(mesh, case.mu, case.body_force, case.boundary)
    reg = build_regularization("ones", mesh)
    op = RegularizedOperator(system, reg)
    P = make_preconditioner(system, reg, kind="diag")
    _, rep = minres(op.apply, op.rhs(), M=P.apply, tol=1e-10)

    bound = minres_bound_finite(spectral_constants(system, reg), slack_factor=0.0)
    ratios = [rep.history[k - 1] / bound(k) for k in range(1, len(rep.history) + 1)]
    print(f"minres on n=16, ones: {rep.iterations} iterations")
    print(f"observed/bound ratio: worst {max(ratios):.3f} "
          f"(<= 1 means the bound dominates the whole history)")
    ks = (1, len(ratios) // 2, len(ratios))
    for k in ks:
        print(f"  k = {k:2d}: observed {rep.history[k - 1]:.3e}, "
              f"bound {bound(k):.3e}")


if __name__ == "__main__":
    main()
