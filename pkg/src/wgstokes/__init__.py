"""Lowest-order weak Galerkin Stokes solver with rank-one regularization.

The package discretizes the Dirichlet Stokes problem with piecewise
constant velocities (cell plus facet unknowns) and pressures, repairs the
inherited singular/inconsistent saddle system with a rank-one pressure
regularization, and solves it with preconditioned MINRES or GMRES backed
by Schur-complement theory that the spectral module can certify densely.
"""

from .assembly import SaddleSystem, assemble, compute_alpha, export_matrix_market
from .krylov import BreakdownError, NotSPDError, SolveReport, gmres, minres, pcg
from .local_ops import (
    lifting,
    local_stiffness,
    local_weak_divergence,
    local_weak_gradient,
)
from .meshes import Mesh, MeshError, generate_structured, mesh_stats, read_mesh, write_mesh
from .regularization import (
    Regularization,
    RegularizedOperator,
    W_KINDS,
    build_regularization,
    make_w,
    solve_direct,
)
from .schur import (
    BlockPreconditioner,
    FactorizationError,
    SchurApprox,
    incomplete_cholesky,
    make_preconditioner,
)

__version__ = "0.1.0"

__all__ = [
    "Mesh",
    "MeshError",
    "generate_structured",
    "mesh_stats",
    "read_mesh",
    "write_mesh",
    "local_weak_gradient",
    "local_weak_divergence",
    "local_stiffness",
    "lifting",
    "SaddleSystem",
    "assemble",
    "compute_alpha",
    "export_matrix_market",
    "Regularization",
    "RegularizedOperator",
    "W_KINDS",
    "build_regularization",
    "make_w",
    "solve_direct",
    "SolveReport",
    "minres",
    "gmres",
    "pcg",
    "NotSPDError",
    "BreakdownError",
    "SchurApprox",
    "BlockPreconditioner",
    "FactorizationError",
    "incomplete_cholesky",
    "make_preconditioner",
    "__version__",
]
