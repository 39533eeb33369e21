"""Element-local weak operators for the lowest-order weak Galerkin pair.

On each simplex the velocity carries one constant per cell and one constant
per facet (per component); the pressure is one constant per cell.  The weak
gradient of a scalar component lives in the local Raviart-Thomas space
RT0 = span{e_1, ..., e_d, x - x_c} with x_c the cell centroid, so its Gram
matrix is diagonal and every integral below has a closed form: no quadrature
enters the operators or the stiffness matrix.

Local scalar DOF order: [cell, facet_0, ..., facet_d], facet i opposite
local vertex i.  Vector DOFs are component-major over that scalar layout.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass
class RT0Function:
    """Vector field a + b (x - center) on one element."""

    a: np.ndarray
    b: float
    center: np.ndarray

    def evaluate(self, points):
        points = np.atleast_2d(points)
        return self.a[None, :] + self.b * (points - self.center[None, :])

    def normal_flux(self, point, normal):
        """Normal component at a point; constant along any facet plane."""
        return float(self.evaluate(point)[0] @ normal)


def second_moment(mesh, k):
    """integral over element k of |x - centroid|^2, in closed form."""
    v = mesh.vertices[mesh.elements[k]]
    d = mesh.dim
    meas = mesh.element_measures[k]
    s = v.sum(axis=0)
    c = mesh.centroids[k]
    # integral of x x^T over a simplex = |K|/((d+1)(d+2)) (sum v_i v_i^T + s s^T)
    tr = meas / ((d + 1) * (d + 2)) * ((v * v).sum() + s @ s)
    return float(tr - meas * (c @ c))


def rt0_gram(mesh, k):
    """Diagonal Gram matrix of {e_1, ..., e_d, x - x_c} on element k."""
    d = mesh.dim
    g = np.zeros(d + 1)
    g[:d] = mesh.element_measures[k]
    g[d] = second_moment(mesh, k)
    return np.diag(g)


def _element_facet_data(mesh, k):
    fids = mesh.element_facets[k]
    normals = mesh.facet_normals[fids] * mesh.element_facet_signs[k][:, None]
    return (
        mesh.facet_measures[fids],
        mesh.facet_midpoints[fids],
        normals,
    )


def local_weak_gradient(mesh, k):
    """Weak gradient coefficients of the d+2 local scalar basis functions.

    Returns a (d+1, d+2) matrix W: column j holds the RT0 coefficients
    (a_1, ..., a_d, b) of the weak gradient of scalar DOF j.  Defined by
    (grad_w u, w)_K = (u_facet, w.n)_dK - (u_cell, div w)_K for all RT0 w,
    solved through the diagonal Gram matrix.
    """
    d = mesh.dim
    meas = mesh.element_measures[k]
    c = mesh.centroids[k]
    fmeas, fmid, fnrm = _element_facet_data(mesh, k)

    rhs = np.zeros((d + 1, d + 2))
    # cell DOF: only the div term survives; div(x - x_c) = d, div(e_i) = 0
    rhs[d, 0] = -d * meas
    # facet DOFs: (1, w.n)_facet with w.n constant along the facet
    rhs[:d, 1:] = (fmeas[:, None] * fnrm).T
    rhs[d, 1:] = fmeas * np.einsum("fk,fk->f", fmid - c[None, :], fnrm)

    gram = rt0_gram(mesh, k)
    return np.linalg.solve(gram, rhs)


def local_weak_divergence(mesh, k):
    """Weights of the elementwise-constant weak divergence.

    Returns d*(d+2) weights over the component-major local velocity DOFs;
    the weak divergence of u on element k is the dot product of the weights
    with the local DOF values.  Cell DOFs carry weight zero.
    """
    d = mesh.dim
    meas = mesh.element_measures[k]
    fmeas, _, fnrm = _element_facet_data(mesh, k)
    w = np.zeros((d, d + 2))
    w[:, 1:] = (fmeas[:, None] * fnrm).T / meas
    return w.ravel()


def local_stiffness(mesh, k):
    """Gradient-gradient matrix (grad_w phi_i, grad_w phi_j)_K, (d+2)x(d+2).

    Symmetric positive semidefinite with the constant vector in its kernel.
    """
    W = local_weak_gradient(mesh, k)
    gram = rt0_gram(mesh, k)
    return W.T @ gram @ W


def lifting(mesh, k, facet_values):
    """RT0 field on element k matching the normal fluxes of given facet values.

    ``facet_values`` has shape (d+1, d): one constant vector per facet.  The
    lifted field L satisfies (L.n, 1)_e = (v.n, 1)_e on every facet e of the
    element; it ignores any cell value by construction.
    """
    d = mesh.dim
    facet_values = np.asarray(facet_values, dtype=float)
    if facet_values.shape != (d + 1, d):
        raise ValueError(f"facet_values must have shape {(d + 1, d)}")
    c = mesh.centroids[k]
    fmeas, fmid, fnrm = _element_facet_data(mesh, k)
    # rows: flux of a + b (x - x_c) through facet j
    M = np.column_stack([fnrm, np.einsum("fk,fk->f", fmid - c[None, :], fnrm)])
    flux = np.einsum("fk,fk->f", facet_values, fnrm)
    coef = np.linalg.solve(M, flux)
    return RT0Function(a=coef[:d], b=float(coef[d]), center=c)
