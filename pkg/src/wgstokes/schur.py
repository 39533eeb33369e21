"""Schur-complement approximations and block preconditioners.

The exact pressure Schur complement rho w w^T + B A^{-1} B^T is spectrally
equivalent to rho w w^T + Mp with the diagonal pressure mass Mp, so the
preconditioners only ever invert Mp (plus a rank-one update handled in
closed form) and the velocity block A.  A is solved inexactly by conjugate
gradients with a drop-tolerance incomplete Cholesky factor; the factor is
built once per system and shared across the velocity components, which see
identical scalar blocks.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numba
import numpy as np
import scipy.sparse as sp

from .krylov import pcg


class FactorizationError(RuntimeError):
    """Incomplete Cholesky ran out of diagonal shifts."""


# -- incomplete Cholesky with threshold dropping --------------------------


@numba.njit(cache=True)
def _ict_kernel(n, Ap, Ai, Ax, colnorm, droptol, shift, cap):
    """Left-looking IC(droptol) on the lower triangle in CSC form.

    Returns (status, Lp, Li, Lx, nnz): status 0 on success, -1 on a
    nonpositive pivot (caller retries with a larger shift), -2 when the
    preallocated capacity is exceeded (caller retries with more).
    """
    Lp = np.zeros(n + 1, dtype=np.int64)
    Li = np.empty(cap, dtype=np.int64)
    Lx = np.empty(cap)

    work = np.zeros(n)
    pattern = np.empty(n, dtype=np.int64)
    keep_rows = np.empty(n, dtype=np.int64)
    in_pattern = np.zeros(n, dtype=numba.boolean)

    # linked lists: for factored column k, ptr[k] points at its next
    # untouched row entry; head[j]/link[k] bucket columns by that row
    ptr = np.zeros(n, dtype=np.int64)
    head = np.full(n, -1, dtype=np.int64)
    link = np.full(n, -1, dtype=np.int64)

    nnz = 0
    for j in range(n):
        npat = 0
        # load column j of A (rows >= j) plus the diagonal shift
        for idx in range(Ap[j], Ap[j + 1]):
            i = Ai[idx]
            work[i] = Ax[idx]
            pattern[npat] = i
            npat += 1
            in_pattern[i] = True
        if not in_pattern[j]:
            pattern[npat] = j
            npat += 1
            in_pattern[j] = True
        work[j] += shift

        # subtract contributions of all factored columns with L[j,k] != 0
        k = head[j]
        while k >= 0:
            next_k = link[k]
            ljk = Lx[ptr[k]]
            for idx in range(ptr[k], Lp[k + 1]):
                i = Li[idx]
                if not in_pattern[i]:
                    pattern[npat] = i
                    npat += 1
                    in_pattern[i] = True
                    work[i] = 0.0
                work[i] -= ljk * Lx[idx]
            ptr[k] += 1
            if ptr[k] < Lp[k + 1]:
                nxt = Li[ptr[k]]
                link[k] = head[nxt]
                head[nxt] = k
            k = next_k

        pivot = work[j]
        if pivot <= 0.0:
            return -1, Lp, Li, Lx, 0
        diag = np.sqrt(pivot)

        # drop small off-diagonal entries relative to the column of A
        thresh = droptol * colnorm[j]
        kept = 0
        for t in range(npat):
            i = pattern[t]
            if i != j and abs(work[i]) > thresh:
                keep_rows[kept] = i
                kept += 1
        kept_sorted = np.sort(keep_rows[:kept])

        if nnz + kept + 1 > cap:
            return -2, Lp, Li, Lx, 0
        Li[nnz] = j
        Lx[nnz] = diag
        nnz += 1
        for t in range(kept):
            i = kept_sorted[t]
            Li[nnz] = i
            Lx[nnz] = work[i] / diag
            nnz += 1
        Lp[j + 1] = nnz

        # reset the workspace over everything the column touched
        for t in range(npat):
            in_pattern[pattern[t]] = False
            work[pattern[t]] = 0.0

        if Lp[j] + 1 < Lp[j + 1]:
            ptr[j] = Lp[j] + 1
            nxt = Li[ptr[j]]
            link[j] = head[nxt]
            head[nxt] = j
    return 0, Lp, Li, Lx, nnz


@numba.njit(cache=True)
def _lower_solve(Lp, Li, Lx, b):
    """Solve L y = b with L in CSC, diagonal first in each column."""
    y = b.copy()
    n = len(Lp) - 1
    for j in range(n):
        y[j] /= Lx[Lp[j]]
        yj = y[j]
        for idx in range(Lp[j] + 1, Lp[j + 1]):
            y[Li[idx]] -= Lx[idx] * yj
    return y


@numba.njit(cache=True)
def _lower_transpose_solve(Lp, Li, Lx, b):
    """Solve L^T x = b with L in CSC, diagonal first in each column."""
    x = b.copy()
    n = len(Lp) - 1
    for j in range(n - 1, -1, -1):
        acc = x[j]
        for idx in range(Lp[j] + 1, Lp[j + 1]):
            acc -= Lx[idx] * x[Li[idx]]
        x[j] = acc / Lx[Lp[j]]
    return x


@dataclass
class ICholFactor:
    """Lower-triangular incomplete Cholesky factor with solve support."""

    Lp: np.ndarray
    Li: np.ndarray
    Lx: np.ndarray
    shift: float

    @property
    def n(self):
        return len(self.Lp) - 1

    @property
    def nnz(self):
        return int(self.Lp[-1])

    def matrix(self):
        return sp.csc_matrix(
            (self.Lx[: self.nnz], self.Li[: self.nnz], self.Lp),
            shape=(self.n, self.n),
        )

    def solve(self, b):
        """Apply (L L^T)^{-1}."""
        y = _lower_solve(self.Lp, self.Li, self.Lx, np.asarray(b, dtype=float))
        return _lower_transpose_solve(self.Lp, self.Li, self.Lx, y)

    __call__ = solve


def incomplete_cholesky(A, drop_tol=1e-3):
    """IC factorization of an SPD sparse matrix with threshold dropping.

    Off-diagonal entries of the factor smaller than drop_tol times the
    1-norm of the corresponding column of A are discarded; drop_tol = 0
    keeps everything (exact Cholesky up to fill of the elimination).  On a
    nonpositive pivot the factorization restarts with diagonal shifts of
    1e-3, 1e-2 and 1e-1 times the mean diagonal before giving up.
    """
    A = sp.csc_matrix(A)
    n = A.shape[0]
    if A.shape[0] != A.shape[1]:
        raise ValueError("matrix must be square")
    colnorm = np.asarray(np.abs(A).sum(axis=0)).ravel()
    low = sp.tril(A, format="csc")
    low.sort_indices()
    diag_mean = float(A.diagonal().mean())
    cap = max(4 * low.nnz, n + 1, 1)
    shifts = [0.0, 1e-3 * diag_mean, 1e-2 * diag_mean, 1e-1 * diag_mean]
    for shift in shifts:
        current_cap = cap
        while True:
            status, Lp, Li, Lx, nnz = _ict_kernel(
                n, low.indptr.astype(np.int64), low.indices.astype(np.int64),
                low.data.astype(float), colnorm, float(drop_tol), float(shift),
                current_cap,
            )
            if status == 0:
                return ICholFactor(Lp, Li[:nnz].copy(), Lx[:nnz].copy(), shift)
            if status == -2:
                current_cap *= 2
                continue
            break  # nonpositive pivot: next shift
    raise FactorizationError(
        "incomplete Cholesky failed for all diagonal shifts; matrix may not be SPD"
    )


# -- Schur approximations ---------------------------------------------------


@dataclass
class SchurApprox:
    """Pressure mass approximation of the Schur complement.

    variant 'augmented': rho w w^T + Mp, inverted by Sherman-Morrison;
    variant 'plain': Mp alone (used in the vanishing-overlap regime).
    """

    Mp: np.ndarray
    rho: float
    w: np.ndarray
    variant: str = "augmented"
    _wM: np.ndarray = field(init=False, repr=False)
    _denom: float = field(init=False, repr=False)

    def __post_init__(self):
        if self.variant not in ("augmented", "plain"):
            raise ValueError(f"unknown Schur variant {self.variant!r}")
        if np.any(self.Mp <= 0):
            raise ValueError("pressure mass must be positive")
        self._wM = self.w / self.Mp
        self._denom = 1.0 + self.rho * float(self.w @ self._wM)

    def apply(self, x):
        if self.variant == "plain":
            return self.Mp * x
        return self.Mp * x + self.rho * self.w * (self.w @ x)

    def apply_inverse(self, x):
        z = x / self.Mp
        if self.variant == "plain":
            return z
        return z - (self.rho * (self.w @ z) / self._denom) * self._wM

    def dense(self):
        out = np.diag(self.Mp).astype(float)
        if self.variant == "augmented":
            out += self.rho * np.outer(self.w, self.w)
        return out


@dataclass
class InnerSolveStats:
    calls: int = 0
    iterations: int = 0
    max_relres: float = 0.0


@dataclass
class BlockPreconditioner:
    """Block preconditioner built from the velocity block and a Schur proxy.

    kind 'diag' applies [A 0; 0 S_hat]^{-1} (symmetric positive definite,
    pairs with MINRES); kind 'tri' applies the inverse of the block lower
    triangular [A 0; -B -S_hat] (pairs with GMRES).  A is inverted by inner
    CG with the incomplete Cholesky factor, component by component.
    """

    system: object
    schur: SchurApprox
    kind: str = "diag"
    inner_tol: float = 1e-10
    inner_maxiter: int = 2000
    ichol_drop: float = 1e-3
    stats: InnerSolveStats = field(default_factory=InnerSolveStats)
    _factor: ICholFactor = field(init=False, repr=False)

    def __post_init__(self):
        if self.kind not in ("diag", "tri"):
            raise ValueError(f"unknown preconditioner kind {self.kind!r}")
        self._factor = incomplete_cholesky(self.system.A_scalar, self.ichol_drop)

    def solve_velocity(self, r):
        """Apply A^{-1} componentwise via inner PCG."""
        ns = self.system.dofmap.n_scalar
        d = self.system.mesh.dim
        out = np.empty_like(r)
        for c in range(d):
            seg = r[c * ns : (c + 1) * ns]
            x, rep = pcg(
                self.system.A_scalar, seg, M=self._factor,
                tol=self.inner_tol, maxiter=self.inner_maxiter,
            )
            out[c * ns : (c + 1) * ns] = x
            self.stats.calls += 1
            self.stats.iterations += rep.iterations
            if rep.history.size:
                self.stats.max_relres = max(self.stats.max_relres, rep.final_relres)
        return out

    def apply(self, r):
        nu = self.system.n_velocity
        ru, rp = r[:nu], r[nu:]
        zu = self.solve_velocity(ru)
        if self.kind == "diag":
            zp = self.schur.apply_inverse(rp)
        else:
            zp = -self.schur.apply_inverse(rp + self.system.B @ zu)
        return np.concatenate([zu, zp])

    __call__ = apply

    def dense(self):
        """Dense preconditioner matrix (exact A inverse), for spectra."""
        A = self.system.A.toarray()
        S = self.schur.dense()
        nu = self.system.n_velocity
        n = nu + len(self.schur.Mp)
        out = np.zeros((n, n))
        out[:nu, :nu] = A
        if self.kind == "diag":
            out[nu:, nu:] = S
        else:
            out[nu:, :nu] = -self.system.B.toarray()
            out[nu:, nu:] = -S
        return out


def make_preconditioner(system, reg, kind="diag", variant=None,
                        inner_tol=1e-10, inner_maxiter=2000, ichol_drop=1e-3):
    """Assemble the block preconditioner for a regularized system.

    The Schur variant defaults to 'augmented' for finite-overlap choices of
    w and 'plain' for the vanishing-overlap regime, matching the spectral
    analysis of the two cases.
    """
    if variant is None:
        variant = "augmented" if reg.regime == "finite" else "plain"
    schur = SchurApprox(Mp=system.Mp, rho=reg.rho, w=reg.w, variant=variant)
    return BlockPreconditioner(
        system=system, schur=schur, kind=kind, inner_tol=inner_tol,
        inner_maxiter=inner_maxiter, ichol_drop=ichol_drop,
    )
