"""Simplicial meshes with the facet data needed by weak Galerkin assembly.

A mesh stores vertices and elements plus derived facet connectivity: every
facet keeps one global unit normal, and each incident element records the
sign that turns it into the outward normal.  Shared facets therefore see
exactly antiparallel outward normals, which makes the discrete divergence
matrix satisfy its null-space identities to machine precision.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np


class MeshError(ValueError):
    """Raised for topologically or geometrically invalid meshes."""


@dataclass
class Mesh:
    """Conforming simplicial mesh of a d-dimensional domain, d in {2, 3}.

    Parameters
    ----------
    dim : int
        Spatial dimension.
    vertices : (nv, dim) float ndarray
    elements : (ne, dim+1) int ndarray
        Zero-based vertex indices per element.

    Facet ``i`` of an element is the one opposite local vertex ``i``.  Derived
    fields are filled in ``__post_init__``.
    """

    dim: int
    vertices: np.ndarray
    elements: np.ndarray

    element_measures: np.ndarray = field(init=False, repr=False)
    centroids: np.ndarray = field(init=False, repr=False)
    diameters: np.ndarray = field(init=False, repr=False)
    h: float = field(init=False)

    facet_vertices: np.ndarray = field(init=False, repr=False)
    facet_elements: np.ndarray = field(init=False, repr=False)  # (nf, 2), -1 = boundary
    facet_measures: np.ndarray = field(init=False, repr=False)
    facet_midpoints: np.ndarray = field(init=False, repr=False)
    facet_normals: np.ndarray = field(init=False, repr=False)  # one global unit normal
    element_facets: np.ndarray = field(init=False, repr=False)  # (ne, dim+1) facet ids
    element_facet_signs: np.ndarray = field(init=False, repr=False)  # outward = sign*normal
    boundary_facets: np.ndarray = field(init=False, repr=False)
    interior_facets: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.dim not in (2, 3):
            raise MeshError(f"dim must be 2 or 3, got {self.dim}")
        self.vertices = np.ascontiguousarray(self.vertices, dtype=float)
        self.elements = np.ascontiguousarray(self.elements, dtype=np.int64)
        if self.vertices.ndim != 2 or self.vertices.shape[1] != self.dim:
            raise MeshError("vertices must have shape (nv, dim)")
        if self.elements.ndim != 2 or self.elements.shape[1] != self.dim + 1:
            raise MeshError("elements must have shape (ne, dim+1)")
        if self.elements.min(initial=0) < 0 or self.elements.max(initial=-1) >= len(self.vertices):
            raise MeshError("element vertex index out of range")
        self._build_geometry()
        self._build_facets()

    # -- construction ---------------------------------------------------

    def _build_geometry(self):
        v = self.vertices[self.elements]  # (ne, d+1, d)
        edges = v[:, 1:, :] - v[:, :1, :]  # (ne, d, d)
        det = np.linalg.det(edges)
        fact = 2.0 if self.dim == 2 else 6.0
        self.element_measures = np.abs(det) / fact
        if np.any(self.element_measures <= 0) or np.any(
            self.element_measures < 1e-14 * self.element_measures.max()
        ):
            raise MeshError("degenerate element (zero or near-zero measure)")
        self.centroids = v.mean(axis=1)
        # simplex diameter = longest vertex-to-vertex distance
        diam = np.zeros(len(self.elements))
        for a, b in itertools.combinations(range(self.dim + 1), 2):
            d = np.linalg.norm(v[:, a, :] - v[:, b, :], axis=1)
            diam = np.maximum(diam, d)
        self.diameters = diam
        self.h = float(diam.max())

    def _facet_geometry(self, fverts):
        pts = self.vertices[fverts]  # (nf, dim, dim)
        if self.dim == 2:
            t = pts[:, 1, :] - pts[:, 0, :]
            measures = np.linalg.norm(t, axis=1)
            normals = np.column_stack([t[:, 1], -t[:, 0]]) / measures[:, None]
        else:
            e1 = pts[:, 1, :] - pts[:, 0, :]
            e2 = pts[:, 2, :] - pts[:, 0, :]
            cr = np.cross(e1, e2)
            nrm = np.linalg.norm(cr, axis=1)
            measures = 0.5 * nrm
            normals = cr / nrm[:, None]
        midpoints = pts.mean(axis=1)
        return measures, midpoints, normals

    def _build_facets(self):
        ne, d = len(self.elements), self.dim
        nloc = d + 1
        # local facet i = vertices of the element without local vertex i
        local = [[j for j in range(nloc) if j != i] for i in range(nloc)]
        all_facets = np.concatenate(
            [self.elements[:, loc] for loc in local], axis=1
        ).reshape(ne, nloc, d)
        keys = np.sort(all_facets.reshape(-1, d), axis=1)
        uniq, first_idx, inverse, counts = np.unique(
            keys, axis=0, return_index=True, return_inverse=True, return_counts=True
        )
        if counts.max(initial=0) > 2:
            raise MeshError("facet shared by more than two elements")
        # renumber facets in deterministic first-encounter order
        order = np.argsort(first_idx, kind="stable")
        rank = np.empty_like(order)
        rank[order] = np.arange(len(order))
        facet_ids = rank[inverse].reshape(ne, nloc)
        nf = len(uniq)
        self.element_facets = facet_ids
        self.facet_vertices = keys[np.sort(first_idx)]

        facet_elements = np.full((nf, 2), -1, dtype=np.int64)
        flat = facet_ids.ravel()  # element-major encounter order
        elems = np.repeat(np.arange(ne, dtype=np.int64), nloc)
        srt = np.argsort(flat, kind="stable")
        fs, es = flat[srt], elems[srt]
        first = np.ones(len(fs), dtype=bool)
        first[1:] = fs[1:] != fs[:-1]
        facet_elements[fs[first], 0] = es[first]
        facet_elements[fs[~first], 1] = es[~first]
        self.facet_elements = facet_elements
        self.boundary_facets = np.flatnonzero(facet_elements[:, 1] < 0)
        self.interior_facets = np.flatnonzero(facet_elements[:, 1] >= 0)

        self.facet_measures, self.facet_midpoints, self.facet_normals = (
            self._facet_geometry(self.facet_vertices)
        )
        if not np.allclose(
            np.linalg.norm(self.facet_normals, axis=1), 1.0, rtol=0, atol=1e-14
        ):
            raise MeshError("facet normal normalization failed")

        # outward orientation sign per (element, local facet)
        outward = self.facet_midpoints[facet_ids] - self.centroids[:, None, :]
        dots = np.einsum("efk,efk->ef", outward, self.facet_normals[facet_ids])
        if np.any(np.abs(dots) < 1e-14):
            raise MeshError("cannot orient facet (centroid on facet plane)")
        self.element_facet_signs = np.sign(dots)
        # shared facets must be seen with opposite signs from both sides:
        # the signs of the two incidences of an interior facet sum to zero
        acc = np.zeros(nf)
        np.add.at(acc, flat, self.element_facet_signs.ravel())
        if np.any(acc[self.interior_facets] != 0.0):
            raise MeshError(
                "inconsistent facet orientation: shared facet with same-sign "
                "normals from both sides"
            )

    # -- queries ----------------------------------------------------------

    @property
    def n_elements(self):
        return len(self.elements)

    @property
    def n_vertices(self):
        return len(self.vertices)

    @property
    def n_facets(self):
        return len(self.facet_vertices)

    def outward_normals(self):
        """Outward unit normals, shape (ne, dim+1, dim)."""
        return (
            self.facet_normals[self.element_facets]
            * self.element_facet_signs[:, :, None]
        )

    def domain_measure(self):
        return float(self.element_measures.sum())


def generate_structured(dim, n):
    """Uniform simplicial mesh of the unit square/cube with n cells per side.

    2D cells split into 2 triangles along the main diagonal; 3D cells split
    into 6 tetrahedra sharing the cell diagonal, which keeps neighbouring
    cells conforming.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    if dim == 2:
        xs = np.linspace(0.0, 1.0, n + 1)
        X, Y = np.meshgrid(xs, xs, indexing="ij")
        vertices = np.column_stack([X.ravel(order="F"), Y.ravel(order="F")])

        def vid(i, j):
            return j * (n + 1) + i

        elements = []
        for j in range(n):
            for i in range(n):
                v00, v10 = vid(i, j), vid(i + 1, j)
                v01, v11 = vid(i, j + 1), vid(i + 1, j + 1)
                elements.append([v00, v10, v11])
                elements.append([v00, v11, v01])
        return Mesh(2, vertices, np.array(elements))
    if dim == 3:
        xs = np.linspace(0.0, 1.0, n + 1)
        X, Y, Z = np.meshgrid(xs, xs, xs, indexing="ij")
        vertices = np.column_stack(
            [X.ravel(order="F"), Y.ravel(order="F"), Z.ravel(order="F")]
        )

        def vid(i, j, k):
            return (k * (n + 1) + j) * (n + 1) + i

        unit_steps = np.eye(3, dtype=np.int64)
        elements = []
        for k in range(n):
            for j in range(n):
                for i in range(n):
                    base = np.array([i, j, k])
                    for perm in itertools.permutations(range(3)):
                        corner = base.copy()
                        tet = [vid(*corner)]
                        for axis in perm:
                            corner = corner + unit_steps[axis]
                            tet.append(vid(*corner))
                        elements.append(tet)
        return Mesh(3, vertices, np.array(elements))
    raise ValueError(f"dim must be 2 or 3, got {dim}")


def mesh_stats(mesh):
    """Summary statistics; min/max element measures bound the pressure mass."""
    return {
        "dim": mesh.dim,
        "n_vertices": mesh.n_vertices,
        "n_elements": mesh.n_elements,
        "n_facets": mesh.n_facets,
        "n_interior_facets": int(len(mesh.interior_facets)),
        "n_boundary_facets": int(len(mesh.boundary_facets)),
        "h": mesh.h,
        "min_measure": float(mesh.element_measures.min()),
        "max_measure": float(mesh.element_measures.max()),
        "uniformity_ratio": float(
            mesh.element_measures.min() / mesh.element_measures.max()
        ),
        "domain_measure": mesh.domain_measure(),
    }


def write_mesh(mesh, path):
    """Plain-text format: 'dim nv ne', nv coordinate lines, ne index lines."""
    with open(path, "w") as fh:
        fh.write(f"{mesh.dim} {mesh.n_vertices} {mesh.n_elements}\n")
        for v in mesh.vertices:
            fh.write(" ".join(f"{x:.17g}" for x in v) + "\n")
        for e in mesh.elements:
            fh.write(" ".join(str(int(i)) for i in e) + "\n")


def read_mesh(path):
    with open(path) as fh:
        tokens = fh.read().split()
    if len(tokens) < 3:
        raise MeshError("truncated mesh file")
    dim, nv, ne = (int(t) for t in tokens[:3])
    need = 3 + nv * dim + ne * (dim + 1)
    if len(tokens) != need:
        raise MeshError(
            f"mesh file has {len(tokens)} tokens, expected {need} for "
            f"dim={dim}, nv={nv}, ne={ne}"
        )
    coords = np.array([float(t) for t in tokens[3 : 3 + nv * dim]]).reshape(nv, dim)
    conn = np.array(
        [int(t) for t in tokens[3 + nv * dim :]], dtype=np.int64
    ).reshape(ne, dim + 1)
    return Mesh(dim, coords, conn)
