"""Global assembly of the weak Galerkin Stokes saddle system.

Unknowns are the cell and interior-facet velocity constants per component
(component-major) and one pressure constant per cell.  Boundary facet values
are projections of the Dirichlet data and are eliminated into the right-hand
side.  The assembled blocks are

    [ mu*A   -B^T ] [u]   [b1]
    [  -B      0  ] [p] = [b2]

where A is the weak-gradient stiffness (identical scalar block per
component), B the discrete divergence acting on interior facet DOFs only,
and b2 collects the boundary fluxes of the projected data.  The row sums of
b2 measure the compatibility defect of the projected boundary data, which is
what makes the unregularized system solvable only approximately.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .quadrature import facet_reference_rule, facet_rule, simplex_rule


@dataclass
class DofMap:
    """Numbering of velocity/pressure unknowns for one mesh.

    Scalar velocity DOFs: cells first (0..ne-1), then interior facets in
    facet order.  Component c of the velocity occupies the scalar block
    shifted by c * n_scalar.  Pressure DOF = cell index.
    """

    mesh: object

    n_cells: int = field(init=False)
    n_interior_facets: int = field(init=False)
    n_boundary_facets: int = field(init=False)
    n_scalar: int = field(init=False)
    n_velocity: int = field(init=False)
    n_pressure: int = field(init=False)
    interior_index: np.ndarray = field(init=False, repr=False)
    boundary_index: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        mesh = self.mesh
        nf = mesh.n_facets
        self.n_cells = mesh.n_elements
        self.n_interior_facets = len(mesh.interior_facets)
        self.n_boundary_facets = len(mesh.boundary_facets)
        self.interior_index = np.full(nf, -1, dtype=np.int64)
        self.interior_index[mesh.interior_facets] = np.arange(self.n_interior_facets)
        self.boundary_index = np.full(nf, -1, dtype=np.int64)
        self.boundary_index[mesh.boundary_facets] = np.arange(self.n_boundary_facets)
        self.n_scalar = self.n_cells + self.n_interior_facets
        self.n_velocity = mesh.dim * self.n_scalar
        self.n_pressure = self.n_cells

    def scalar_facet_dof(self, facet_ids):
        """Scalar DOF of interior facets, -1 for boundary facets."""
        idx = self.interior_index[facet_ids]
        return np.where(idx >= 0, self.n_cells + idx, -1)

    def velocity_dof(self, component, scalar_dof):
        return component * self.n_scalar + scalar_dof


def _batched_local_data(mesh):
    """Per-element arrays used by assembly, all computed at once."""
    d = mesh.dim
    ne = mesh.n_elements
    meas = mesh.element_measures
    cent = mesh.centroids
    fids = mesh.element_facets
    fmeas = mesh.facet_measures[fids]  # (ne, d+1)
    fmid = mesh.facet_midpoints[fids]  # (ne, d+1, d)
    nrm = mesh.outward_normals()  # (ne, d+1, d)

    v = mesh.vertices[mesh.elements]
    s = v.sum(axis=1)
    m2 = meas / ((d + 1) * (d + 2)) * (
        (v * v).sum(axis=(1, 2)) + np.einsum("ek,ek->e", s, s)
    ) - meas * np.einsum("ek,ek->e", cent, cent)

    # weak gradient coefficients W: (ne, d+1, d+2)
    rel = fmid - cent[:, None, :]
    W = np.zeros((ne, d + 1, d + 2))
    W[:, :d, 0] = 0.0
    W[:, d, 0] = -d * meas / m2
    W[:, :d, 1:] = (fmeas[:, :, None] * nrm).transpose(0, 2, 1) / meas[:, None, None]
    W[:, d, 1:] = fmeas * np.einsum("efk,efk->ef", rel, nrm) / m2[:, None]

    # local stiffness S = W^T G W with G = diag(meas, ..., meas, m2)
    G = np.zeros((ne, d + 1))
    G[:, :d] = meas[:, None]
    G[:, d] = m2
    S = np.einsum("eri,er,erj->eij", W, G, W)

    # lifting matrix: R = M^{-1}, unit-flux RT0 coefficients per facet
    M = np.concatenate(
        [nrm, np.einsum("efk,efk->ef", rel, nrm)[:, :, None]], axis=2
    )  # (ne, d+1, d+1)
    R = np.linalg.inv(M)
    return {
        "W": W,
        "S": S,
        "R": R,
        "m2": m2,
        "fmeas": fmeas,
        "fmid": fmid,
        "nrm": nrm,
        "fids": fids,
    }


def project_boundary_values(mesh, g, boundary_rule="mid"):
    """Facet averages of g on boundary facets under the given facet rule.

    Returns an (n_boundary_facets, dim) array ordered like the DofMap's
    boundary facet numbering.
    """
    bf = mesh.boundary_facets
    fverts = mesh.vertices[mesh.facet_vertices[bf]]  # (nbf, d, d)
    ref_pts, ref_w = facet_rule(mesh.dim, boundary_rule)
    vals = _facet_average(fverts, g, ref_pts, ref_w)
    return vals


def _facet_average(fverts, g, ref_pts, ref_w):
    nbf, _, d = fverts.shape
    # map reference facet coords to physical points
    origin = fverts[:, 0, :]
    span = fverts[:, 1:, :] - origin[:, None, :]  # (nbf, d-1, d)
    pts = origin[:, None, :] + np.einsum("qr,nrk->nqk", ref_pts, span)
    vals = np.asarray(g(pts.reshape(-1, d)), dtype=float).reshape(nbf, len(ref_w), d)
    return np.einsum("q,nqk->nk", ref_w, vals)


@dataclass
class SaddleSystem:
    """Assembled blocks of the discrete Stokes saddle problem."""

    mesh: object
    dofmap: DofMap
    mu: float
    boundary_rule: str
    A_scalar: sp.csr_matrix  # one velocity component's stiffness block
    B: sp.csr_matrix  # pressure x velocity divergence block
    Mp: np.ndarray  # diagonal pressure mass (cell measures)
    b1: np.ndarray
    b2: np.ndarray
    boundary_values: np.ndarray  # projected Dirichlet data per boundary facet

    _A_full: sp.csr_matrix = field(default=None, repr=False)

    @property
    def A(self):
        """Full velocity stiffness, block-diagonal over components."""
        if self._A_full is None:
            eye = sp.identity(self.mesh.dim, format="csr")
            self._A_full = sp.kron(eye, self.A_scalar).tocsr()
        return self._A_full

    @property
    def n_velocity(self):
        return self.dofmap.n_velocity

    @property
    def n_pressure(self):
        return self.dofmap.n_pressure

    def weak_divergence(self, u, include_boundary=True):
        """Elementwise weak divergence of a velocity vector of unknowns.

        ``u`` is the physical (unrescaled) velocity.  For a solved
        regularized system the result is not zero but the constant field
        that spreads the data incompatibility over the domain, with size
        alpha / |Omega| for the normalized-constant choice of w.
        """
        div = self.B @ u
        if include_boundary:
            div = div + self.b2
        return div / self.Mp


def assemble(mesh, mu, f, g, boundary_rule="mid"):
    """Assemble the saddle system for viscosity mu and data f, g.

    ``f`` and ``g`` are vectorized callables mapping (m, dim) point arrays to
    (m, dim) values.  ``boundary_rule`` selects the facet projection of g
    ('mid', 'gauss2' or 'gauss3').  The load (f, lift v)_K uses a degree-3
    volume rule; the stiffness and divergence entries are exact.
    """
    if mu <= 0:
        raise ValueError(f"viscosity mu must be positive, got {mu}")
    d = mesh.dim
    ne = mesh.n_elements
    dofmap = DofMap(mesh)
    ns = dofmap.n_scalar
    data = _batched_local_data(mesh)
    S, R, fmeas, nrm, fids = data["S"], data["R"], data["fmeas"], data["nrm"], data["fids"]

    # scalar DOF of each local slot: [cell, facet_0..facet_d]; boundary -> -1
    loc_dofs = np.concatenate(
        [np.arange(ne, dtype=np.int64)[:, None], dofmap.scalar_facet_dof(fids)], axis=1
    )  # (ne, d+2)

    gbar = project_boundary_values(mesh, g, boundary_rule)

    # ---- A (scalar block) and the boundary lift into b1 ----
    rows = np.repeat(loc_dofs[:, :, None], d + 2, axis=2)
    cols = np.repeat(loc_dofs[:, None, :], d + 2, axis=1)
    vals = S
    keep = (rows >= 0) & (cols >= 0)
    A_scalar = sp.coo_matrix(
        (vals[keep], (rows[keep], cols[keep])), shape=(ns, ns)
    ).tocsr()
    A_scalar.sum_duplicates()

    b1 = np.zeros(dofmap.n_velocity)
    # columns belonging to boundary facets multiply the projected data
    bnd_cols = (rows >= 0) & (cols < 0)
    if bnd_cols.any():
        e_idx, i_idx, j_idx = np.nonzero(bnd_cols)
        unk = loc_dofs[e_idx, i_idx]
        bidx = dofmap.boundary_index[fids[e_idx, j_idx - 1]]
        sval = S[e_idx, i_idx, j_idx]
        for c in range(d):
            np.add.at(b1, dofmap.velocity_dof(c, unk), -mu * sval * gbar[bidx, c])

    # ---- load term (f, lift v)_K via degree-3 quadrature ----
    qp, qw = simplex_rule(d, 2)
    v0 = mesh.vertices[mesh.elements[:, 0]]
    span = mesh.vertices[mesh.elements[:, 1:]] - v0[:, None, :]
    pts = v0[:, None, :] + np.einsum("qr,erk->eqk", qp, span)  # (ne, nq, d)
    fvals = np.asarray(f(pts.reshape(-1, d)), dtype=float).reshape(ne, len(qw), d)
    meas = mesh.element_measures
    F0 = meas[:, None] * np.einsum("q,eqk->ek", qw, fvals)  # integral of f
    rel_q = pts - mesh.centroids[:, None, :]
    F1 = meas * np.einsum("q,eqk,eqk->e", qw, fvals, rel_q)  # integral of f.(x-c)
    # lifted load per (element, facet): column i of R holds the RT0
    # coefficients of the unit-flux field of facet i
    lift_load = np.einsum("eti,et->ei", R[:, :d, :], F0) + R[:, d, :] * F1[:, None]
    fdof = dofmap.scalar_facet_dof(fids)
    mask = fdof >= 0
    e_idx, i_idx = np.nonzero(mask)
    for c in range(d):
        np.add.at(
            b1,
            dofmap.velocity_dof(c, fdof[e_idx, i_idx]),
            nrm[e_idx, i_idx, c] * lift_load[e_idx, i_idx],
        )

    # ---- B block over interior facet DOFs ----
    Brows, Bcols, Bvals = [], [], []
    for c in range(d):
        Brows.append(e_idx)
        Bcols.append(dofmap.velocity_dof(c, fdof[e_idx, i_idx]))
        Bvals.append(fmeas[e_idx, i_idx] * nrm[e_idx, i_idx, c])
    B = sp.coo_matrix(
        (np.concatenate(Bvals), (np.concatenate(Brows), np.concatenate(Bcols))),
        shape=(ne, dofmap.n_velocity),
    ).tocsr()

    # ---- b2: boundary fluxes of the projected data ----
    b2 = np.zeros(ne)
    bnd_mask = ~mask
    eb, ib = np.nonzero(bnd_mask)
    bidx = dofmap.boundary_index[fids[eb, ib]]
    flux = fmeas[eb, ib] * np.einsum("nk,nk->n", gbar[bidx], nrm[eb, ib])
    np.add.at(b2, eb, flux)

    return SaddleSystem(
        mesh=mesh,
        dofmap=dofmap,
        mu=float(mu),
        boundary_rule=boundary_rule,
        A_scalar=A_scalar,
        B=B,
        Mp=meas.copy(),
        b1=b1,
        b2=b2,
        boundary_values=gbar,
    )


def compute_alpha(mesh, g, boundary_rule="mid"):
    """Compatibility defect of the projected boundary data.

    Sum over boundary facets of |e| (Q_bnd g - avg_e g) . n_e, where avg_e g
    is computed with a high-order reference rule.  Zero when the projection
    is exact; decays at the projection rule's order otherwise.  Equals the
    sum of the b2 entries up to the reference-rule error, because the exact
    facet averages of compatible data integrate to zero around the boundary.
    """
    bf = mesh.boundary_facets
    fverts = mesh.vertices[mesh.facet_vertices[bf]]
    rule_pts, rule_w = facet_rule(mesh.dim, boundary_rule)
    ref_pts, ref_w = facet_reference_rule(mesh.dim)
    proj = _facet_average(fverts, g, rule_pts, rule_w)
    exact = _facet_average(fverts, g, ref_pts, ref_w)

    # boundary facets: outward normal of the owning element
    owners = mesh.facet_elements[bf, 0]
    loc = np.argmax(mesh.element_facets[owners] == bf[:, None], axis=1)
    nrm = mesh.facet_normals[bf] * mesh.element_facet_signs[owners, loc][:, None]
    meas = mesh.facet_measures[bf]
    return float(np.sum(meas * np.einsum("nk,nk->n", proj - exact, nrm)))


def export_matrix_market(system, directory):
    """Write A, B, Mp and the right-hand sides in Matrix Market format."""
    import os

    from scipy.io import mmwrite

    os.makedirs(directory, exist_ok=True)
    mmwrite(os.path.join(directory, "A.mtx"), system.A)
    mmwrite(os.path.join(directory, "B.mtx"), system.B)
    mmwrite(os.path.join(directory, "Mp.mtx"), sp.diags(system.Mp).tocoo())
    mmwrite(os.path.join(directory, "b1.mtx"), system.b1.reshape(-1, 1))
    mmwrite(os.path.join(directory, "b2.mtx"), system.b2.reshape(-1, 1))
    return [
        os.path.join(directory, name)
        for name in ("A.mtx", "B.mtx", "Mp.mtx", "b1.mtx", "b2.mtx")
    ]
