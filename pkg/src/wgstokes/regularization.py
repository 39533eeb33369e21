"""Rank-one regularization of the singular Stokes saddle system.

The assembled system has a one-dimensional pressure null space (constants)
and, because the projected boundary data is only approximately compatible,
an inconsistent right-hand side.  Subtracting rho/mu * w w^T from the zero
block restores unique solvability for any unit vector w not orthogonal to
the constants.  Solvers work on the equivalent rescaled form

    [ A    -B^T      ] [mu*u]   [  b1  ]
    [ -B   -rho w w^T] [  p ] = [mu*b2 ]

whose condition does not degenerate as mu -> 0.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

W_KINDS = ("ones", "mass", "pin", "random")
DEFAULT_SEED = 20240

#: regime per w choice: 'pin' has gamma -> 0 under refinement, the others
#: keep gamma bounded away from zero
W_REGIMES = {"ones": "finite", "mass": "finite", "pin": "small", "random": "finite"}


def make_w(kind, n_pressure, mesh=None, seed=DEFAULT_SEED):
    """Unit regularization vector and its overlap gamma with the constants.

    kinds: 'ones' (normalized constant vector), 'mass' (normalized cell
    measures; equals 'ones' on uniform meshes), 'pin' (first coordinate
    vector, overlap 1/sqrt(N)), 'random' (normalized uniform[0,1] draw).
    """
    if kind not in W_KINDS:
        raise ValueError(f"unknown w kind {kind!r}; choose from {W_KINDS}")
    n = n_pressure
    if kind == "ones":
        w = np.full(n, 1.0 / np.sqrt(n))
    elif kind == "mass":
        if mesh is None:
            raise ValueError("kind 'mass' requires the mesh")
        meas = mesh.element_measures
        w = meas / np.linalg.norm(meas)
    elif kind == "pin":
        w = np.zeros(n)
        w[0] = 1.0
    else:  # random
        rng = np.random.default_rng(seed)
        v = rng.uniform(0.0, 1.0, size=n)
        w = v / np.linalg.norm(v)
    ones = np.full(n, 1.0 / np.sqrt(n))
    gamma = float(w @ ones)
    return w, gamma


def default_rho(regime, mesh):
    """rho = 1 when gamma stays finite; 0.1 * min cell measure otherwise."""
    if regime == "finite":
        return 1.0
    if regime == "small":
        return 0.1 * float(mesh.element_measures.min())
    raise ValueError(f"unknown regime {regime!r}")


@dataclass
class Regularization:
    """Regularization vector w, weight rho and derived quantities."""

    kind: str
    w: np.ndarray
    gamma: float
    rho: float
    regime: str
    seed: int | None = None

    @property
    def gamma2N(self):
        """gamma^2 * N, the overlap scale entering the small-gamma spectrum."""
        return self.gamma**2 * len(self.w)


def build_regularization(kind, mesh, rho="auto", seed=DEFAULT_SEED):
    w, gamma = make_w(kind, mesh.n_elements, mesh=mesh, seed=seed)
    regime = W_REGIMES[kind]
    if rho == "auto":
        rho_val = default_rho(regime, mesh)
    else:
        rho_val = float(rho)
        if rho_val <= 0:
            raise ValueError(f"rho must be positive, got {rho_val}")
    if gamma == 0.0:
        raise ValueError("regularization vector is orthogonal to the constants")
    return Regularization(
        kind=kind, w=w, gamma=gamma, rho=rho_val, regime=regime,
        seed=seed if kind == "random" else None,
    )


@dataclass
class RegularizedOperator:
    """Matrix-free application of the rescaled regularized saddle matrix."""

    system: object
    reg: Regularization
    _nu: int = field(init=False)

    def __post_init__(self):
        self._nu = self.system.n_velocity

    @property
    def shape(self):
        n = self._nu + self.system.n_pressure
        return (n, n)

    def split(self, x):
        return x[: self._nu], x[self._nu :]

    def join(self, u, p):
        return np.concatenate([u, p])

    def apply(self, x):
        sysm, reg = self.system, self.reg
        u, p = self.split(x)
        d = sysm.mesh.dim
        ns = sysm.dofmap.n_scalar
        Au = np.empty_like(u)
        for c in range(d):
            Au[c * ns : (c + 1) * ns] = sysm.A_scalar @ u[c * ns : (c + 1) * ns]
        top = Au - sysm.B.T @ p
        bottom = -(sysm.B @ u) - reg.rho * reg.w * (reg.w @ p)
        return self.join(top, bottom)

    __call__ = apply

    def rhs(self):
        """Right-hand side of the rescaled system, (b1, mu*b2)."""
        return self.join(self.system.b1, self.system.mu * self.system.b2)

    def dense(self):
        """Dense matrix, for spectral studies on small problems."""
        sysm, reg = self.system, self.reg
        A = sysm.A.toarray()
        B = sysm.B.toarray()
        n = self.shape[0]
        out = np.zeros((n, n))
        nu = self._nu
        out[:nu, :nu] = A
        out[:nu, nu:] = -B.T
        out[nu:, :nu] = -B
        out[nu:, nu:] = -reg.rho * np.outer(reg.w, reg.w)
        return out

    def bordered_sparse(self):
        """Sparse equivalent with the rank-one block kept as a border.

        Introducing t = sqrt(rho) w^T p turns the dense rank-one block into
        one extra row/column, so direct sparse factorization stays cheap:
        eliminating t from the symmetric bordered matrix recovers exactly
        -rho w w^T in the pressure block.
        """
        sysm, reg = self.system, self.reg
        nu, npr = self._nu, self.system.n_pressure
        sq = np.sqrt(reg.rho)
        wcol = sp.csr_matrix(
            (sq * reg.w, (np.arange(npr), np.zeros(npr, dtype=np.int64))),
            shape=(npr, 1),
        )
        zero_u1 = sp.csr_matrix((nu, 1))
        one = sp.csr_matrix(np.array([[1.0]]))
        mat = sp.bmat(
            [
                [sysm.A, -sysm.B.T, zero_u1],
                [-sysm.B, None, -wcol],
                [zero_u1.T, -wcol.T, one],
            ],
            format="csc",
        )
        return mat


def solve_direct(system, reg):
    """Sparse direct solve of the rescaled system via the bordered form.

    Returns (u, p) with the velocity already divided by mu.  The auxiliary
    border unknown is discarded.
    """
    from scipy.sparse.linalg import splu

    op = RegularizedOperator(system, reg)
    mat = op.bordered_sparse()
    rhs = np.concatenate([op.rhs(), [0.0]])
    sol = splu(mat).solve(rhs)
    nu = system.n_velocity
    u = sol[:nu] / system.mu
    p = sol[nu : nu + system.n_pressure]
    return u, p
