"""Structured simplex meshes and the lowest-order weak operators.

Builds a few uniform meshes, prints their statistics, and then checks the
defining property of the discrete operators on a single element: the weak
gradient of a field sampled from an affine function recovers the exact
gradient, and the weak divergence recovers the exact divergence.  Both are
consequences of the normal-closure identity sum_i |e_i| n_i = 0, which is
also verified directly.
"""
import numpy as np

from wgstokes import generate_structured, mesh_stats
from wgstokes.local_ops import local_weak_divergence, local_weak_gradient


def main():
    for dim, ns in ((2, (4, 8, 16)), (3, (2, 4))):
        print(f"-- dim {dim} --")
        for n in ns:
            mesh = generate_structured(dim, n)
            s = mesh_stats(mesh)
            print(
                f"n={n:3d}: {s['n_elements']:5d} elements, "
                f"{s['n_facets']:5d} facets "
                f"({s['n_boundary_facets']} boundary), h={s['h']:.4f}, "
                f"uniformity {s['uniformity_ratio']:.2f}"
            )
        print()

    mesh = generate_structured(2, 4)
    d = mesh.dim
    k = 5  # any element works, exactness is elementwise

    fids = mesh.element_facets[k]
    fmeas = mesh.facet_measures[fids]
    fnrm = mesh.facet_normals[fids] * mesh.element_facet_signs[k][:, None]
    closure = np.linalg.norm(fmeas @ fnrm)
    print(f"normal closure |sum |e| n| on element {k}: {closure:.2e}")

    # affine scalar field q(x) = c0 + g . x sampled into the local DOFs:
    # cell value at the centroid, facet values at facet midpoints
    rng = np.random.default_rng(7)
    g = rng.standard_normal(d)
    c0 = rng.standard_normal()
    fmid = mesh.facet_midpoints[mesh.element_facets[k]]
    dofs = np.concatenate([[c0 + g @ mesh.centroids[k]], fmid @ g + c0])

    W = local_weak_gradient(mesh, k)
    coeffs = W @ dofs  # RT0 coefficients (a_1..a_d, b) of the weak gradient
    print(f"weak gradient of affine field: {coeffs[:d]}  (exact {g})")
    print(f"linear part b (should vanish): {coeffs[d]:.2e}")

    # affine velocity u(x) = A x + c; local DOFs are component-major
    # (cell sample at the centroid, then facet midpoint samples)
    A = rng.standard_normal((d, d))
    c = rng.standard_normal(d)
    pts = np.vstack([mesh.centroids[k], fmid])
    vals = pts @ A.T + c
    div = local_weak_divergence(mesh, k) @ vals.T.reshape(-1)
    print(f"weak divergence of affine field: {div:.6f}  (exact {np.trace(A):.6f})")
    print(f"difference: {abs(div - np.trace(A)):.2e}")


if __name__ == "__main__":
    main()
