"""Krylov solvers with preconditioned-residual histories.

Hand-rolled MINRES, restarted GMRES and CG rather than library wrappers:
the convergence studies need the exact preconditioned residual norm at every
iteration under a fixed, documented convention, which the library callbacks
do not expose reliably.  All recurrences evaluate in a fixed order, so runs
are bit-reproducible for identical inputs.

Conventions: zero initial guess unless given, stopping on the relative
preconditioned residual (for MINRES the P^{-1}-norm of the true residual,
for GMRES the 2-norm of the left-preconditioned residual), histories start
at iteration 1.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np


class NotSPDError(RuntimeError):
    """Operator or preconditioner failed a positive-definiteness probe."""


class BreakdownError(RuntimeError):
    """Krylov recurrence broke down with a nonzero residual."""


@dataclass
class SolveReport:
    """Outcome of one Krylov solve."""

    solver: str
    iterations: int
    converged: bool
    history: np.ndarray  # relative preconditioned residual per iteration
    wall_time: float
    restarts: int = 0
    inner_iterations: int = 0
    final_relres: float = np.nan
    true_relres: float = np.nan  # unpreconditioned, logged for transparency

    def to_dict(self):
        return {
            "solver": self.solver,
            "iterations": int(self.iterations),
            "converged": bool(self.converged),
            "history": [float(v) for v in np.asarray(self.history).ravel()],
            "wall_time": float(self.wall_time),
            "restarts": int(self.restarts),
            "inner_iterations": int(self.inner_iterations),
            "final_relres": float(self.final_relres),
            "true_relres": float(self.true_relres),
        }


def _as_apply(op):
    if op is None:
        return lambda x: x
    if callable(op) and not hasattr(op, "dot"):
        return op
    return lambda x: op @ x


def _unpreconditioned_relres(apply_A, b, x):
    nb = np.linalg.norm(b)
    if nb == 0.0:
        return float(np.linalg.norm(apply_A(x)))
    return float(np.linalg.norm(b - apply_A(x)) / nb)


def minres(A, b, M=None, tol=1e-9, maxiter=1000, x0=None):
    """Preconditioned MINRES for symmetric systems.

    ``A`` applies the (possibly indefinite) symmetric operator, ``M`` the
    symmetric positive definite preconditioner inverse.  Stops when the
    P^{-1}-norm of the residual has dropped by ``tol`` relative to the
    initial one; that quantity is monotone by construction and is what the
    history records.
    """
    apply_A = _as_apply(A)
    apply_M = _as_apply(M)
    n = len(b)
    x = np.zeros(n) if x0 is None else np.array(x0, dtype=float)
    t0 = time.perf_counter()

    r = b - apply_A(x) if x0 is not None else b.astype(float).copy()
    z = apply_M(r)
    gamma_sq = float(r @ z)
    if gamma_sq < 0:
        raise NotSPDError("preconditioner produced r^T M r < 0")
    gamma = np.sqrt(gamma_sq)
    if gamma == 0.0:
        return x, SolveReport(
            "minres", 0, True, np.zeros(0), time.perf_counter() - t0,
            final_relres=0.0, true_relres=0.0,
        )
    norm_r0 = gamma

    v, v_old = r, np.zeros(n)
    z = z / gamma
    gamma_old = 1.0
    eta = gamma
    s_old = s = 0.0
    c_old = c = 1.0
    w = np.zeros(n)
    w_old = np.zeros(n)
    history = []
    converged = False
    it = 0

    for it in range(1, maxiter + 1):
        Az = apply_A(z)
        delta = float(z @ Az)
        v_new = Az - (delta / gamma) * v - (gamma / gamma_old) * v_old
        z_new = apply_M(v_new)
        gamma_new_sq = float(v_new @ z_new)
        if gamma_new_sq < -1e-13 * norm_r0**2:
            raise NotSPDError("preconditioner produced r^T M r < 0")
        gamma_new = np.sqrt(max(gamma_new_sq, 0.0))

        a0 = c * delta - c_old * s * gamma
        a1 = np.hypot(a0, gamma_new)
        a2 = s * delta + c_old * c * gamma
        a3 = s_old * gamma
        if a1 == 0.0:
            raise BreakdownError("MINRES breakdown with nonzero residual")
        c_new = a0 / a1
        s_new = gamma_new / a1

        w_new = (z - a3 * w_old - a2 * w) / a1
        x = x + (c_new * eta) * w_new
        eta = -s_new * eta

        history.append(abs(eta) / norm_r0)
        if history[-1] <= tol:
            converged = True
            break
        if gamma_new == 0.0:  # Krylov space exhausted, residual already zero
            converged = history[-1] <= tol
            break

        v_old, v = v, v_new
        w_old, w = w, w_new
        z = z_new / gamma_new
        gamma_old, gamma = gamma, gamma_new
        s_old, s = s, s_new
        c_old, c = c, c_new

    return x, SolveReport(
        "minres", it, converged, np.array(history), time.perf_counter() - t0,
        final_relres=history[-1] if history else np.nan,
        true_relres=_unpreconditioned_relres(apply_A, b, x),
    )


def gmres(A, b, M=None, tol=1e-9, maxiter=1000, restart=30, x0=None):
    """Restarted GMRES with left preconditioning.

    Arnoldi uses modified Gram-Schmidt with one reorthogonalization pass.
    The history records the relative residual of the preconditioned system,
    which the Givens machinery provides for free at each step.
    """
    apply_A = _as_apply(A)
    apply_M = _as_apply(M)
    n = len(b)
    x = np.zeros(n) if x0 is None else np.array(x0, dtype=float)
    t0 = time.perf_counter()

    norm_b = np.linalg.norm(apply_M(b))
    if norm_b == 0.0:
        return np.zeros(n), SolveReport(
            "gmres", 0, True, np.zeros(0), time.perf_counter() - t0,
            final_relres=0.0, true_relres=0.0,
        )

    history = []
    converged = False
    total_it = 0
    restarts = 0

    while total_it < maxiter:
        r = apply_M(b - apply_A(x))
        beta = np.linalg.norm(r)
        if beta / norm_b <= tol:
            converged = True
            break
        m = min(restart, maxiter - total_it)
        V = np.zeros((m + 1, n))
        H = np.zeros((m + 1, m))
        cs = np.zeros(m)
        sn = np.zeros(m)
        g = np.zeros(m + 1)
        g[0] = beta
        V[0] = r / beta
        k_used = 0
        cycle_converged = False

        for k in range(m):
            wvec = apply_M(apply_A(V[k]))
            # modified Gram-Schmidt + one reorthogonalization pass
            for i in range(k + 1):
                hik = float(V[i] @ wvec)
                H[i, k] = hik
                wvec = wvec - hik * V[i]
            for i in range(k + 1):
                corr = float(V[i] @ wvec)
                H[i, k] += corr
                wvec = wvec - corr * V[i]
            hnext = np.linalg.norm(wvec)
            H[k + 1, k] = hnext

            # apply stored rotations, then a new one to annihilate H[k+1,k]
            for i in range(k):
                t = cs[i] * H[i, k] + sn[i] * H[i + 1, k]
                H[i + 1, k] = -sn[i] * H[i, k] + cs[i] * H[i + 1, k]
                H[i, k] = t
            denom = np.hypot(H[k, k], H[k + 1, k])
            if denom == 0.0:
                raise BreakdownError("GMRES breakdown: zero Hessenberg column")
            cs[k] = H[k, k] / denom
            sn[k] = H[k + 1, k] / denom
            H[k, k] = denom
            H[k + 1, k] = 0.0
            g[k + 1] = -sn[k] * g[k]
            g[k] = cs[k] * g[k]

            total_it += 1
            k_used = k + 1
            history.append(abs(g[k + 1]) / norm_b)
            if history[-1] <= tol:
                cycle_converged = True
                break
            if hnext == 0.0:
                if abs(g[k + 1]) / norm_b <= tol:
                    cycle_converged = True
                    break
                raise BreakdownError("Arnoldi breakdown with nonzero residual")
            V[k + 1] = wvec / hnext

        # solve the small triangular system and update x
        if k_used > 0:
            y = np.linalg.solve(H[:k_used, :k_used], g[:k_used])
            x = x + V[:k_used].T @ y
        if cycle_converged:
            converged = True
            break
        restarts += 1

    rel_final = history[-1] if history else 0.0
    return x, SolveReport(
        "gmres", total_it, converged, np.array(history),
        time.perf_counter() - t0, restarts=restarts, final_relres=rel_final,
        true_relres=_unpreconditioned_relres(apply_A, b, x),
    )


def pcg(A, b, M=None, tol=1e-10, maxiter=1000, x0=None):
    """Preconditioned conjugate gradients for SPD systems.

    History records sqrt(r^T M r) relative to its initial value.  Raises
    NotSPDError when a search direction produces p^T A p <= 0.
    """
    apply_A = _as_apply(A)
    apply_M = _as_apply(M)
    n = len(b)
    x = np.zeros(n) if x0 is None else np.array(x0, dtype=float)
    t0 = time.perf_counter()

    r = b - apply_A(x) if x0 is not None else b.astype(float).copy()
    z = apply_M(r)
    rz = float(r @ z)
    if rz < 0:
        raise NotSPDError("preconditioner produced r^T M r < 0")
    norm0 = np.sqrt(rz)
    if norm0 == 0.0:
        return x, SolveReport(
            "pcg", 0, True, np.zeros(0), time.perf_counter() - t0,
            final_relres=0.0, true_relres=0.0,
        )
    p = z.copy()
    history = []
    converged = False
    it = 0
    for it in range(1, maxiter + 1):
        Ap = apply_A(p)
        pAp = float(p @ Ap)
        if pAp <= 0.0:
            raise NotSPDError("operator produced p^T A p <= 0")
        alpha = rz / pAp
        x = x + alpha * p
        r = r - alpha * Ap
        z = apply_M(r)
        rz_new = float(r @ z)
        if rz_new < 0:
            raise NotSPDError("preconditioner produced r^T M r < 0")
        history.append(np.sqrt(rz_new) / norm0)
        if history[-1] <= tol:
            converged = True
            break
        p = z + (rz_new / rz) * p
        rz = rz_new
    return x, SolveReport(
        "pcg", it, converged, np.array(history), time.perf_counter() - t0,
        final_relres=history[-1] if history else np.nan,
        true_relres=_unpreconditioned_relres(apply_A, b, x),
    )
