"""Global assembly: algebraic identities, per-element cross-check, exactness."""
import numpy as np
import pytest
import scipy.io as sio
import scipy.sparse as sp

from wgstokes import assembly, local_ops, regularization


def affine_velocity(x):
    # divergence-free affine field, compatible boundary data
    return np.column_stack([x[:, 0] + 2 * x[:, 1], 3 * x[:, 0] - x[:, 1]])


def zero_field(x):
    return np.zeros_like(x)


def test_ones_in_left_null_space_of_b(zero_system2_n2, system2_n8, system3_n1):
    for system in (zero_system2_n2, system2_n8, system3_n1):
        resid = np.abs(np.asarray(system.B.sum(axis=0))).max()
        assert resid <= 1e-12


def test_pressure_mass_is_element_measures(system2_n8, system3_n1):
    for system in (system2_n8, system3_n1):
        np.testing.assert_allclose(
            system.Mp, system.mesh.element_measures, atol=1e-15
        )


def test_velocity_block_symmetric_spd(zero_system2_n2, system3_n1):
    for system in (zero_system2_n2, system3_n1):
        A = system.A_scalar.toarray()
        assert np.abs(A - A.T).max() <= 1e-13
        assert np.linalg.eigvalsh(A)[0] > 0


def test_scalar_block_matches_per_element_sum(mesh2_n2):
    system = assembly.assemble(mesh2_n2, 1.0, zero_field, zero_field)
    dm = system.dofmap
    n = dm.n_scalar
    manual = np.zeros((n, n))
    for k in range(mesh2_n2.n_elements):
        K = local_ops.local_stiffness(mesh2_n2, k)
        gdofs = np.concatenate(
            [[k], dm.scalar_facet_dof(mesh2_n2.element_facets[k])]
        )
        for li, gi in enumerate(gdofs):
            if gi < 0:
                continue
            for lj, gj in enumerate(gdofs):
                if gj < 0:
                    continue
                manual[gi, gj] += K[li, lj]
    np.testing.assert_allclose(system.A_scalar.toarray(), manual, atol=1e-12)


def test_divergence_block_matches_per_element(mesh2_n2):
    system = assembly.assemble(mesh2_n2, 1.0, zero_field, zero_field)
    dm = system.dofmap
    manual = np.zeros((dm.n_pressure, dm.n_velocity))
    for k in range(mesh2_n2.n_elements):
        D = local_ops.local_weak_divergence(mesh2_n2, k).reshape(2, -1)
        gdofs = np.concatenate(
            [[k], dm.scalar_facet_dof(mesh2_n2.element_facets[k])]
        )
        meas = mesh2_n2.element_measures[k]
        for comp in range(2):
            for lj, gj in enumerate(gdofs):
                if gj < 0:
                    continue
                manual[k, dm.velocity_dof(comp, gj)] += meas * D[comp, lj]
    np.testing.assert_allclose(system.B.toarray(), manual, atol=1e-12)


def test_load_sum_equals_flux_defect(mesh2_n4, case2d):
    for rule in ("mid", "gauss2"):
        system = assembly.assemble(
            mesh2_n4, 1.0, case2d.body_force, case2d.boundary, boundary_rule=rule
        )
        alpha = assembly.compute_alpha(mesh2_n4, case2d.boundary, boundary_rule=rule)
        assert system.b2.sum() == pytest.approx(alpha, abs=1e-13)


def test_affine_solution_reproduced_exactly(mesh2_n4):
    # divergence-free affine velocity with zero pressure and zero body force
    # lies in the discrete space, so the solver must return it exactly
    system = assembly.assemble(mesh2_n4, 1.0, zero_field, affine_velocity)
    reg = regularization.build_regularization("ones", mesh2_n4, rho=1.0)
    u, p = regularization.solve_direct(system, reg)
    dm = system.dofmap

    assert np.abs(p).max() <= 1e-12
    cell_vals = affine_velocity(system.mesh.centroids)
    for comp in range(2):
        got = u[dm.velocity_dof(comp, np.arange(dm.n_cells))]
        np.testing.assert_allclose(got, cell_vals[:, comp], atol=1e-12)
    mids = system.mesh.facet_midpoints[system.mesh.interior_facets]
    facet_vals = affine_velocity(mids)
    fdofs = dm.scalar_facet_dof(system.mesh.interior_facets)
    for comp in range(2):
        got = u[dm.velocity_dof(comp, fdofs)]
        np.testing.assert_allclose(got, facet_vals[:, comp], atol=1e-12)

    alpha = assembly.compute_alpha(mesh2_n4, affine_velocity)
    assert abs(alpha) <= 1e-13


def test_boundary_projection_affine_rule_independent(mesh2_n4):
    pm = assembly.project_boundary_values(mesh2_n4, affine_velocity, "mid")
    pg = assembly.project_boundary_values(mesh2_n4, affine_velocity, "gauss2")
    np.testing.assert_allclose(pm, pg, atol=1e-13)


def test_boundary_projection_rules_differ_on_curved_data(mesh2_n4, case2d):
    pm = assembly.project_boundary_values(mesh2_n4, case2d.boundary, "mid")
    pg = assembly.project_boundary_values(mesh2_n4, case2d.boundary, "gauss2")
    assert np.abs(pm - pg).max() > 1e-8


def _sparse_diff(X, Y):
    diff = abs(sp.csr_matrix(X) - sp.csr_matrix(Y))
    return diff.max() if diff.nnz else 0.0


def test_matrix_market_export_roundtrip(tmp_path, system2_n4):
    assembly.export_matrix_market(system2_n4, tmp_path)
    names = sorted(p.name for p in tmp_path.iterdir())
    assert names == ["A.mtx", "B.mtx", "Mp.mtx", "b1.mtx", "b2.mtx"]
    A = sio.mmread(tmp_path / "A.mtx")
    B = sio.mmread(tmp_path / "B.mtx")
    Mp = sio.mmread(tmp_path / "Mp.mtx")
    b1 = np.asarray(sio.mmread(tmp_path / "b1.mtx")).ravel()
    b2 = np.asarray(sio.mmread(tmp_path / "b2.mtx")).ravel()
    dm = system2_n4.dofmap
    nu = dm.n_velocity
    assert A.shape == (nu, nu) and B.shape == (dm.n_pressure, nu)
    assert _sparse_diff(A, sp.kron(sp.eye(2), system2_n4.A_scalar)) <= 1e-14
    assert _sparse_diff(B, system2_n4.B) <= 1e-14
    assert _sparse_diff(Mp, sp.diags(system2_n4.Mp)) <= 1e-14
    np.testing.assert_allclose(b1, system2_n4.b1, atol=0)
    np.testing.assert_allclose(b2, system2_n4.b2, atol=0)


def test_boundary_values_stored(system2_n4, case2d):
    mesh = system2_n4.mesh
    mids = mesh.facet_midpoints[mesh.boundary_facets]
    expect = case2d.boundary(mids)
    # midpoint-rule projection of the trace equals evaluation at midpoints
    np.testing.assert_allclose(system2_n4.boundary_values, expect, atol=1e-13)


def test_assemble_3d_counts(system3_n1):
    dm = system3_n1.dofmap
    mesh = system3_n1.mesh
    assert dm.n_pressure == mesh.n_elements
    assert dm.n_scalar == mesh.n_elements + dm.n_interior_facets
    assert dm.n_velocity == 3 * dm.n_scalar
    assert system3_n1.B.shape == (dm.n_pressure, dm.n_velocity)
