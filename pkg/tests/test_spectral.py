"""Dense spectral verification: inf-sup estimate, interval reports, bounds."""
import numpy as np
import pytest

from wgstokes import regularization, spectral
from wgstokes.regularization import build_regularization


def test_lemma_names_exported():
    assert set(spectral.LEMMAS) == {
        "L_SCHUR_FINITE",
        "L_SADDLE_FINITE",
        "L_SCHUR_SMALL",
        "L_SADDLE_SMALL",
    }


def test_beta_estimate_stable_under_refinement(system2_n4, system2_n8):
    # beta decreases slowly toward its mesh-independent limit; check it stays
    # bounded away from zero and the decrement is modest rather than collapsing
    r4 = spectral.estimate_beta(system2_n4)
    r8 = spectral.estimate_beta(system2_n8)
    assert 0.2 < r4.beta_sq < 0.6
    assert 0.2 < r8.beta_sq < 0.6
    assert 0.0 < r4.beta - r8.beta < 0.15
    assert r4.zero_eigenvalue == pytest.approx(0.0, abs=1e-10)
    assert r4.d == 2


def test_beta_gap_check_raises(system2_n4):
    with pytest.raises(spectral.RankAnomalyError):
        spectral.estimate_beta(system2_n4, gap_tol=10.0)


def test_constants_consistent(system2_n4, reg_ones_n4):
    c = spectral.spectral_constants(system2_n4, reg_ones_n4)
    assert c["d"] == 2
    assert c["N"] == system2_n4.n_pressure
    expect_c1 = c["beta"] ** 2 * (c["lam_min_Mp"] / c["lam_max_Mp"]) * c["gamma"] ** 2
    assert c["C1"] == pytest.approx(expect_c1, rel=1e-12)
    # uniform mesh: the normalized overlap of the ones weighting is exactly 1
    assert c["gamma"] == pytest.approx(1.0, rel=1e-12)
    assert c["gamma2N"] == pytest.approx(c["N"], rel=1e-12)
    assert c["lam_min_A"] > 0
    assert c["omega"] == pytest.approx(1.0, abs=1e-13)


def test_schur_dense_regularization_restores_rank(system2_n4, reg_ones_n4):
    S0 = spectral.schur_dense(system2_n4)
    eigs0 = np.linalg.eigvalsh(S0)
    assert eigs0[0] <= 1e-10 * eigs0[-1]  # singular without the rank-one term
    S1 = spectral.schur_dense(system2_n4, reg_ones_n4)
    eigs1 = np.linalg.eigvalsh(S1)
    assert eigs1[0] > 1e-8 * eigs1[-1]


@pytest.mark.parametrize("lemma", ["L_SCHUR_FINITE", "L_SADDLE_FINITE"])
def test_finite_overlap_lemmas_hold(system2_n4, reg_ones_n4, lemma):
    rep = spectral.verify_lemma(lemma, system2_n4, reg_ones_n4)
    assert rep.satisfied, rep.summary()
    assert rep.eigen_ok.all()
    assert len(rep.violations) == 0
    assert rep.intervals


@pytest.mark.parametrize("lemma", ["L_SCHUR_SMALL", "L_SADDLE_SMALL"])
def test_small_overlap_lemmas_hold(system2_n4, reg_pin_n4, lemma):
    rep = spectral.verify_lemma(lemma, system2_n4, reg_pin_n4)
    assert rep.satisfied, rep.summary()
    # eigen_ok[0] flags the outlier band, which is reported separately from
    # satisfied (its O(rho^2) constant is problem dependent); the rest of the
    # spectrum must honor the perturbed intervals
    assert rep.eigen_ok[1:].all()
    assert rep.outlier is not None
    assert rep.outlier_predicted is not None


def test_saddle_finite_unit_cluster(system2_n4, reg_ones_n4):
    # velocity fields with zero weak divergence are fixed points of the
    # preconditioned operator: eigenvalue one with multiplicity nu - N + 1,
    # always pressure-free
    rep = spectral.verify_lemma("L_SADDLE_FINITE", system2_n4, reg_ones_n4)
    nu = system2_n4.n_velocity
    N = system2_n4.n_pressure
    assert rep.unit_cluster_expected == nu - N + 1
    assert rep.unit_cluster_size == rep.unit_cluster_expected
    # no pressure-coupled mode sits at one: the unit eigenvalue is purely
    # structural, margin 1e-8
    assert rep.margins["near_unit_pressure_modes"] == 0


def test_saddle_small_unit_cluster_in_gap(system2_n4, reg_pin_n4):
    rep = spectral.verify_lemma("L_SADDLE_SMALL", system2_n4, reg_pin_n4)
    assert rep.unit_cluster_size == rep.unit_cluster_expected
    neg = next(iv for iv in rep.intervals if iv.label == "negative")
    pos = next(iv for iv in rep.intervals if iv.label == "positive")
    # the structural unit eigenvalues fall strictly between the two bulk
    # intervals, so interval membership alone cannot account for them
    assert neg.hi < 1.0 < pos.lo
    assert rep.outlier < 0
    assert rep.outlier_predicted < 0


def test_saddle_small_outlier_limit(system2_n4):
    builder = lambda rho: build_regularization("pin", system2_n4.mesh, rho=rho)
    study = spectral.outlier_limit_study(
        system2_n4, builder, [1e-6, 1e-5], tol=0.05
    )
    assert study["within_tol"]
    for row in study["rows"]:
        assert row["ratio"] == pytest.approx(1.0, abs=0.05)


def test_report_serializes(system2_n4, reg_ones_n4):
    rep = spectral.verify_lemma("L_SCHUR_FINITE", system2_n4, reg_ones_n4)
    d = rep.to_dict()
    assert d["lemma"] == "L_SCHUR_FINITE"
    assert d["satisfied"] is True
    assert isinstance(d["intervals"], list)
    assert "summary" not in d  # method, not payload
    assert rep.summary()


def test_unknown_lemma_rejected(system2_n4, reg_ones_n4):
    with pytest.raises(ValueError):
        spectral.verify_lemma("L_SCHUR_MEDIUM", system2_n4, reg_ones_n4)


def test_bounds_monotone_and_positive(system2_n4, reg_ones_n4, reg_pin_n4):
    cf = spectral.spectral_constants(system2_n4, reg_ones_n4)
    cs = spectral.spectral_constants(system2_n4, reg_pin_n4)
    # slack-free evaluation exposes the pure convergence factor, which must
    # decay; with the default O(h^d) slack a coarse mesh may only give the
    # trivial constant bound, checked separately below
    for bound in (
        spectral.minres_bound_finite(cf, slack_factor=0.0),
        spectral.gmres_bound_finite(cf, slack_factor=0.0),
        spectral.minres_bound_small(cs, slack_factor=0.0),
        spectral.gmres_bound_small(cs, slack_factor=0.0),
    ):
        vals = np.array([bound(k) for k in range(2, 60)])
        assert np.all(vals > 0)
        assert np.all(np.diff(vals) <= 1e-14)
        assert vals[-1] < vals[0]
    degenerate = spectral.minres_bound_finite(cf)
    vals = np.array([degenerate(k) for k in range(2, 60)])
    assert np.all(vals > 0)
    assert np.all(vals <= vals[0] + 1e-14)


def test_small_bounds_validity_window(system2_n4, mesh2_n4):
    # x = rho / lam_min(Mp) beyond the window must be rejected
    lam_min = system2_n4.Mp.min()
    reg_big = build_regularization("pin", mesh2_n4, rho=10.0 * lam_min)
    consts = spectral.spectral_constants(system2_n4, reg_big)
    with pytest.raises(spectral.ConstraintViolation):
        spectral.minres_bound_small(consts)
    with pytest.raises(spectral.ConstraintViolation):
        spectral.gmres_bound_small(consts)


def test_verify_lemma_on_3d(system3_n1):
    mesh = system3_n1.mesh
    reg = regularization.build_regularization("ones", mesh, rho=1.0)
    rep = spectral.verify_lemma("L_SCHUR_FINITE", system3_n1, reg)
    assert rep.satisfied, rep.summary()
    assert rep.constants["d"] == 3
