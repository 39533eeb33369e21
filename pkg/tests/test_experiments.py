"""Benchmark cases, single-problem driver, study helpers, report writers."""
import json

import numpy as np
import pytest

from wgstokes import experiments
from wgstokes.experiments import SolverConfig, manufactured_case, run_case
from wgstokes.meshes import Mesh


@pytest.mark.parametrize("dim", [2, 3])
@pytest.mark.parametrize("mu", [1.0, 1e-4])
def test_manufactured_self_check(dim, mu):
    # finite-difference probe of the coded solution triple: the momentum
    # equation, the coded gradient, and the divergence-free constraint
    case = manufactured_case(dim, mu)
    checks = case.self_check()
    assert checks["momentum_rel_err"] <= 1e-6
    assert checks["gradient_rel_err"] <= 1e-6
    assert checks["divergence_max"] <= 1e-10


def test_manufactured_case_metadata():
    case = manufactured_case(2, 1e-4)
    assert case.dim == 2 and case.mu == pytest.approx(1e-4)
    pts = np.array([[0.3, 0.4], [0.7, 0.1]])
    assert case.velocity(pts).shape == (2, 2)
    assert case.pressure(pts).shape == (2,)
    assert case.boundary(pts).shape == (2, 2)
    with pytest.raises(ValueError):
        manufactured_case(4, 1.0)


def test_solver_config_defaults():
    assert SolverConfig("minres").resolved(2) == ("diag", 1e-9)
    assert SolverConfig("gmres").resolved(2) == ("tri", 1e-9)
    assert SolverConfig("minres").resolved(3) == ("diag", 1e-8)
    assert SolverConfig("gmres", precond="diag", tol=1e-7).resolved(2) == (
        "diag",
        1e-7,
    )


def test_run_case_basics(case2d, mesh2_n8):
    err, rep = run_case(case2d, mesh2_n8)
    assert rep.converged
    assert err.converged
    assert err.n_pressure == mesh2_n8.n_elements
    assert err.h == pytest.approx(mesh2_n8.h)
    # discrete boundary flux defect of the curved data is genuinely nonzero
    assert abs(err.alpha) > 1e-6
    # the rank-one feedback reproduces the defect through the solution
    assert err.projection_identity_residual <= 1e-8
    d = err.to_dict()
    assert set(experiments.ERROR_KEYS) <= set(d)


def test_run_case_errors_small_on_fine_mesh(case2d, mesh2_n8):
    err, _ = run_case(case2d, mesh2_n8)
    assert err.pressure_l2 < 0.25
    assert err.velocity_l2 < 0.2
    # the cell averages superconverge relative to the raw velocity error
    assert err.projected_velocity_l2 < 0.25 * err.velocity_l2


def test_element_order_invariance(case2d, mesh2_n4):
    # relabeling elements must not change any reported error norm
    err_a, _ = run_case(case2d, mesh2_n4)
    rng = np.random.default_rng(123)
    perm = rng.permutation(mesh2_n4.n_elements)
    shuffled = Mesh(2, mesh2_n4.vertices.copy(), mesh2_n4.elements[perm])
    err_b, _ = run_case(case2d, shuffled)
    for key in experiments.ERROR_KEYS:
        assert getattr(err_a, key) == pytest.approx(
            getattr(err_b, key), rel=1e-10, abs=1e-12
        ), key


def test_convergence_study_orders(case2d):
    study = experiments.convergence_study(case2d, [4, 8])
    errs = study["errors"]
    for key in experiments.ERROR_KEYS:
        assert errs[key][1] < errs[key][0]
    assert set(study["orders"]) == set(experiments.ERROR_KEYS)
    assert study["orders"]["projected_velocity_l2"] > 1.5


def test_iteration_table_row_shape():
    table = experiments.iteration_table(2, [4, 6], ["ones"], [1.0], solver="minres")
    assert table["ns"] == [4, 6]
    (row,) = table["rows"]
    assert row["w"] == "ones" and row["mu"] == 1.0
    assert len(row["iterations"]) == 2
    assert all(row["converged"])
    assert all(t >= 0 for t in row["wall_times"])


def test_alpha_study_not_applicable_for_affine():
    affine = lambda x: np.column_stack([x[:, 0] + 2 * x[:, 1], 3 * x[:, 0] - x[:, 1]])
    out = experiments.alpha_order_study(affine, "mid", [4, 8])
    assert out["slope"] is None


def test_alpha_study_midpoint_slope(case2d):
    out = experiments.alpha_order_study(case2d.boundary, "mid", [4, 8, 16])
    assert out["slope"] == pytest.approx(2.0, abs=0.3)


def test_provenance_stamp():
    prov = experiments.provenance(seed=11, tolerances={"tol": 1e-9})
    assert prov["version"].startswith("0.")
    assert prov["seed"] == 11
    assert prov["tolerances"] == {"tol": 1e-9}


def test_write_report_json(tmp_path):
    path = tmp_path / "report.json"
    experiments.write_report_json(
        path, {"values": np.arange(3.0), "flag": np.bool_(True)}, seed=5
    )
    data = json.loads(path.read_text())
    assert data["values"] == [0.0, 1.0, 2.0]
    assert data["flag"] is True
    assert data["provenance"]["seed"] == 5


def test_write_table_csv(tmp_path):
    table = experiments.iteration_table(2, [4], ["ones"], [1.0], solver="minres")
    path = tmp_path / "table.csv"
    experiments.write_table_csv(path, table, seed=20240)
    lines = path.read_text().splitlines()
    comments = [ln for ln in lines if ln.startswith("#")]
    assert comments  # provenance header present
    assert any("seed" in ln for ln in comments)
    header = next(ln for ln in lines if not ln.startswith("#"))
    assert header.split(",")[:2] == ["w", "mu"]
