"""Quadrature rules on reference simplices and facets.

All rules use the convention that weights sum to one, so an integral over a
physical cell or facet is ``measure * sum(w_i * f(x_i))``.  Volume rules are
collapsed tensor-product Gauss-Jacobi rules: a rule built from ``n`` points per
direction integrates polynomials of total degree ``2n - 1`` exactly, in any
dimension, with all weights positive.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np
from scipy.special import roots_jacobi, roots_legendre


def _gauss01(n, alpha=0):
    """Gauss nodes/weights on [0, 1] for the weight function (1-x)**alpha.

    Normalized so that sum(w) * (alpha + 1) = 1, i.e. the weights integrate
    the weight function itself.
    """
    if alpha == 0:
        t, w = roots_legendre(n)
    else:
        t, w = roots_jacobi(n, alpha, 0.0)
    x = 0.5 * (t + 1.0)
    w = w / 2.0 ** (alpha + 1)
    return x, w


@lru_cache(maxsize=None)
def segment_rule(n):
    """n-point Gauss rule on the unit segment, exact to degree 2n - 1."""
    x, w = _gauss01(n)
    return x.reshape(-1, 1), w.copy()


@lru_cache(maxsize=None)
def simplex_rule(dim, n):
    """Collapsed Gauss rule on the reference simplex, exact to degree 2n - 1.

    Parameters
    ----------
    dim : int
        Simplex dimension (1, 2 or 3).
    n : int
        Points per direction; the rule has n**dim points.

    Returns
    -------
    points : (m, dim) ndarray
        Coordinates in the reference simplex {x_i >= 0, sum x_i <= 1}.
    weights : (m,) ndarray
        Positive weights summing to 1.
    """
    if dim == 1:
        return segment_rule(n)
    if dim == 2:
        a, wa = _gauss01(n, alpha=1)
        b, wb = _gauss01(n)
        A, B = np.meshgrid(a, b, indexing="ij")
        WA, WB = np.meshgrid(wa, wb, indexing="ij")
        x = A.ravel()
        y = (B * (1.0 - A)).ravel()
        w = (WA * WB).ravel()
        # weights of the collapsed map integrate to the simplex measure 1/2
        return np.column_stack([x, y]), w / w.sum()
    if dim == 3:
        a, wa = _gauss01(n, alpha=2)
        b, wb = _gauss01(n, alpha=1)
        c, wc = _gauss01(n)
        A, B, C = np.meshgrid(a, b, c, indexing="ij")
        WA, WB, WC = np.meshgrid(wa, wb, wc, indexing="ij")
        x = A.ravel()
        y = (B * (1.0 - A)).ravel()
        z = (C * (1.0 - A) * (1.0 - B)).ravel()
        w = (WA * WB * WC).ravel()
        return np.column_stack([x, y, z]), w / w.sum()
    raise ValueError(f"unsupported simplex dimension {dim}")


def facet_rule(mesh_dim, rule):
    """Quadrature on a reference facet of a mesh of dimension ``mesh_dim``.

    ``rule`` is one of ``"mid"`` (facet midpoint), ``"gauss2"`` or ``"gauss3"``
    (2- and 3-point-per-direction Gauss rules, exact to degree 3 and 5).
    Facets are segments in 2D and triangles in 3D; points are returned in the
    reference coordinates of the facet.
    """
    fdim = mesh_dim - 1
    if rule in ("mid", "midpoint"):
        pt = np.full((1, fdim), 1.0 / (fdim + 1))
        return pt, np.ones(1)
    if rule == "gauss2":
        return simplex_rule(fdim, 2)
    if rule == "gauss3":
        return simplex_rule(fdim, 3)
    raise ValueError(f"unknown boundary rule {rule!r}; use 'mid', 'gauss2' or 'gauss3'")


def facet_reference_rule(mesh_dim):
    """High-order facet rule used as the reference for exact facet averages."""
    fdim = mesh_dim - 1
    # degree 15 on segments, degree 9 on triangles: far beyond any rule that
    # is compared against it
    return simplex_rule(fdim, 8 if fdim == 1 else 5)


def monomial_integral_simplex(exponents):
    """Exact integral of prod(x_i**a_i) over the reference simplex.

    Equals prod(a_i!) * dim! / (sum(a_i) + dim)! times the simplex measure
    1/dim!; the closed form below already includes the measure.
    """
    from math import factorial

    a = list(exponents)
    num = 1
    for ai in a:
        num *= factorial(ai)
    return num / factorial(sum(a) + len(a))
