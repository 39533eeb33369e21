"""Incomplete Cholesky, Schur approximations, block preconditioners."""
import numpy as np
import pytest
import scipy.sparse as sp

from wgstokes import assembly, krylov, meshes, regularization, schur


@pytest.fixture(scope="module")
def scalar_block_n16():
    mesh = meshes.generate_structured(2, 16)
    zero = lambda x: np.zeros_like(x)
    return assembly.assemble(mesh, 1.0, zero, zero).A_scalar


def test_ichol_exact_on_diagonal():
    d = np.array([4.0, 9.0, 16.0, 25.0])
    fac = schur.incomplete_cholesky(sp.csr_matrix(np.diag(d)))
    b = np.array([1.0, 2.0, 3.0, 4.0])
    np.testing.assert_allclose(fac.solve(b), b / d, atol=1e-14)
    assert fac.shift == 0.0


def test_ichol_exact_on_tridiagonal():
    # no fill-in outside the tridiagonal pattern, so IC equals full Cholesky
    n = 20
    A = sp.diags([np.full(n - 1, -1.0), np.full(n, 4.0), np.full(n - 1, -1.0)],
                 [-1, 0, 1], format="csr")
    fac = schur.incomplete_cholesky(A, drop_tol=0.0)
    rng = np.random.default_rng(1)
    b = rng.standard_normal(n)
    np.testing.assert_allclose(fac.solve(b), np.linalg.solve(A.toarray(), b),
                               atol=1e-12)


def test_ichol_rejects_indefinite():
    with pytest.raises(schur.FactorizationError):
        schur.incomplete_cholesky(sp.csr_matrix(np.diag([1.0, -1.0])))


def test_ichol_factor_is_lower_triangular(scalar_block_n16):
    fac = schur.incomplete_cholesky(scalar_block_n16, drop_tol=1e-3)
    L = fac.matrix()
    assert sp.triu(L, k=1).nnz == 0
    assert fac.nnz <= scalar_block_n16.nnz  # dropped entries keep it sparse


def test_pcg_with_ichol_baseline(scalar_block_n16):
    # drop tolerance 1e-3 keeps the velocity inner solve around a dozen
    # iterations on the n = 16 scalar block (plain CG needs hundreds)
    A = scalar_block_n16
    rng = np.random.default_rng(7)
    b = rng.standard_normal(A.shape[0])
    fac = schur.incomplete_cholesky(A, drop_tol=1e-3)
    _, rep = krylov.pcg(A, b, M=fac.solve, tol=1e-10, maxiter=200)
    assert rep.converged
    assert rep.iterations <= 12
    _, plain = krylov.pcg(A, b, tol=1e-10, maxiter=2000)
    assert plain.iterations > 5 * rep.iterations


def test_sherman_morrison_inverse_vs_dense(mesh2_n4):
    rng = np.random.default_rng(3)
    Mp = mesh2_n4.element_measures.copy()
    w = rng.random(len(Mp))
    w /= np.linalg.norm(w)
    S = schur.SchurApprox(Mp, 0.37, w, variant="augmented")
    dense = S.dense()
    for _ in range(4):
        x = rng.standard_normal(len(Mp))
        np.testing.assert_allclose(S.apply(x), dense @ x, atol=1e-13)
        np.testing.assert_allclose(
            S.apply_inverse(x), np.linalg.solve(dense, x), atol=1e-12
        )


def test_schur_plain_variant(mesh2_n4):
    Mp = mesh2_n4.element_measures.copy()
    w = np.zeros(len(Mp))
    w[0] = 1.0
    S = schur.SchurApprox(Mp, 0.01, w, variant="plain")
    x = np.arange(1.0, len(Mp) + 1.0)
    np.testing.assert_allclose(S.apply(x), Mp * x, atol=0)
    np.testing.assert_allclose(S.apply_inverse(x), x / Mp, atol=0)
    with pytest.raises(ValueError):
        schur.SchurApprox(Mp, 0.01, w, variant="lumped")


def test_default_variant_follows_regime(system2_n4, reg_ones_n4, reg_pin_n4):
    Pd = schur.make_preconditioner(system2_n4, reg_ones_n4, kind="diag")
    assert Pd.schur.variant == "augmented"
    Pp = schur.make_preconditioner(system2_n4, reg_pin_n4, kind="diag")
    assert Pp.schur.variant == "plain"


@pytest.mark.parametrize("kind", ["diag", "tri"])
def test_preconditioner_apply_matches_dense(system2_n4, reg_ones_n4, kind):
    P = schur.make_preconditioner(
        system2_n4, reg_ones_n4, kind=kind, inner_tol=1e-13
    )
    dense = P.dense()
    rng = np.random.default_rng(9)
    r = rng.standard_normal(dense.shape[0])
    z = P.apply(r)
    np.testing.assert_allclose(z, np.linalg.solve(dense, r), atol=1e-7)


def test_inner_solve_stats_accumulate(system2_n4, reg_ones_n4):
    P = schur.make_preconditioner(system2_n4, reg_ones_n4, kind="diag")
    before = P.stats.iterations
    P.apply(np.ones(system2_n4.n_velocity + system2_n4.n_pressure))
    assert P.stats.iterations > before
    assert P.stats.calls == system2_n4.mesh.dim
    assert P.stats.max_relres <= 1e-10
