"""Quadrature rules: exactness against the closed-form monomial integrals."""
import itertools
import math

import numpy as np
import pytest

from wgstokes import quadrature


def monomial_ratio(exponents):
    # integral of x^a over the unit simplex divided by the simplex measure,
    # i.e. the value a normalized-weight rule must reproduce
    d = len(exponents)
    num = quadrature.monomial_integral_simplex(exponents)
    den = quadrature.monomial_integral_simplex((0,) * d)
    return num / den


def test_monomial_integral_hand_values():
    assert quadrature.monomial_integral_simplex((0, 0)) == pytest.approx(0.5)
    assert quadrature.monomial_integral_simplex((1, 0)) == pytest.approx(1 / 6)
    assert quadrature.monomial_integral_simplex((2, 0)) == pytest.approx(1 / 12)
    assert quadrature.monomial_integral_simplex((1, 1)) == pytest.approx(1 / 24)
    assert quadrature.monomial_integral_simplex((0, 0, 0)) == pytest.approx(1 / 6)


def test_monomial_integral_factorial_formula():
    rng = np.random.default_rng(3)
    for d in (2, 3):
        for _ in range(20):
            a = tuple(int(k) for k in rng.integers(0, 5, size=d))
            expect = (
                np.prod([math.factorial(k) for k in a])
                / math.factorial(sum(a) + d)
            )
            assert quadrature.monomial_integral_simplex(a) == pytest.approx(
                expect, rel=1e-14
            )


@pytest.mark.parametrize("dim", [2, 3])
@pytest.mark.parametrize("degree", [1, 2, 3, 4])
def test_simplex_rule_exactness(dim, degree):
    pts, wts = quadrature.simplex_rule(dim, degree)
    assert wts.sum() == pytest.approx(1.0, abs=1e-14)
    assert pts.min() >= -1e-14 and pts.sum(axis=1).max() <= 1 + 1e-14
    for exps in itertools.product(range(degree + 1), repeat=dim):
        if sum(exps) > degree:
            continue
        quad = float(np.sum(wts * np.prod(pts**np.array(exps), axis=1)))
        assert quad == pytest.approx(monomial_ratio(exps), abs=1e-13), exps


def test_segment_rule_gauss_exactness():
    for npts in (1, 2, 3, 4):
        pts, wts = quadrature.segment_rule(npts)
        assert wts.sum() == pytest.approx(1.0, abs=1e-14)
        for k in range(2 * npts - 1 + 1):
            quad = float(np.sum(wts * pts.ravel() ** k))
            assert quad == pytest.approx(1.0 / (k + 1), abs=1e-13), (npts, k)


@pytest.mark.parametrize(
    "rule,exact_degree", [("mid", 1), ("gauss2", 3), ("gauss3", 5)]
)
def test_facet_rule_2d_segments(rule, exact_degree):
    pts, wts = quadrature.facet_rule(2, rule)
    assert wts.sum() == pytest.approx(1.0, abs=1e-14)
    for k in range(exact_degree + 1):
        quad = float(np.sum(wts * pts.ravel() ** k))
        assert quad == pytest.approx(1.0 / (k + 1), abs=1e-13), k
    # one degree beyond must fail for the low-order rules
    k = exact_degree + 1
    quad = float(np.sum(wts * pts.ravel() ** k))
    assert quad != pytest.approx(1.0 / (k + 1), abs=1e-13)


def test_facet_rule_3d_triangles():
    for rule in ("mid", "gauss2", "gauss3"):
        pts, wts = quadrature.facet_rule(3, rule)
        assert pts.shape[1] == 2
        assert wts.sum() == pytest.approx(1.0, abs=1e-14)
        # every rule integrates affine fields on the reference triangle
        assert float(np.sum(wts * pts[:, 0])) == pytest.approx(1 / 3, abs=1e-13)
        assert float(np.sum(wts * pts[:, 1])) == pytest.approx(1 / 3, abs=1e-13)


def test_unknown_rule_raises():
    with pytest.raises(ValueError):
        quadrature.facet_rule(2, "trapezoid")


def test_facet_reference_rule_high_order():
    pts, wts = quadrature.facet_reference_rule(2)
    assert wts.sum() == pytest.approx(1.0, abs=1e-14)
    # reference rule is the oracle for boundary projections: degree >= 7
    for k in range(8):
        quad = float(np.sum(wts * pts.ravel() ** k))
        assert quad == pytest.approx(1.0 / (k + 1), abs=1e-13)
