import numpy as np
import pytest
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from afem.fem import (
    CoefficientField, FeFunction, FeSpace, apply_dirichlet, assemble_load, assemble_mass,
    assemble_operator, quadrature_points,
)
from afem.mesh import load_initial, lshape_mesh, square_mesh, uniform_refine
from afem.problems import ProblemSpec, Variant, catalog
from afem.solver import (
    EigenConfig, NewtonConfig, SolverConfig, SolverError, bicgstab, conjugate_gradient,
    krylov_solve, nonlinear_residual, solve, solve_eigen_problem, solve_linear_problem,
    solve_nonlinear_problem,
)


def _spd(n, seed):
    rng = np.random.default_rng(seed)
    B = rng.standard_normal((n, n))
    return B @ B.T + n * np.eye(n), rng.standard_normal(n)


# -- Krylov -------------------------------------------------------------------

def test_identity_one_iteration():
    r = np.arange(1.0, 6.0)
    x, st = krylov_solve(sp.identity(5, format="csr"), r)
    assert np.allclose(x, r) and st.iterations <= 1 and st.converged


@pytest.mark.parametrize("seed", range(5))
def test_random_spd_matches_dense(seed):
    A, b = _spd(8, seed)
    x, st = krylov_solve(sp.csr_matrix(A), b)
    assert np.allclose(x, np.linalg.solve(A, b), atol=1e-9)
    assert np.linalg.norm(b - A @ x) <= 1e-10 * np.linalg.norm(b)


@pytest.mark.parametrize("seed", range(5))
def test_bicgstab_nonsymmetric_matches_dense(seed):
    rng = np.random.default_rng(seed)
    A = rng.standard_normal((8, 8)) + 8 * np.eye(8)
    b = rng.standard_normal(8)
    x, st = krylov_solve(sp.csr_matrix(A), b, symmetric=False)
    assert st.method == "bicgstab"
    assert np.allclose(x, np.linalg.solve(A, b), atol=1e-9)


def test_zero_rhs_gives_zero():
    A, _ = _spd(6, 1)
    for fn in (conjugate_gradient, bicgstab):
        x, st = fn(sp.csr_matrix(A), np.zeros(6), x0=np.ones(6))
        assert np.array_equal(x, np.zeros(6)) and st.iterations == 0


def test_non_convergence_reports_residual():
    space = FeSpace(square_mesh(8), 1)
    K, F = apply_dirichlet(assemble_operator(space, CoefficientField()), assemble_load(space, 1.0), space)
    with pytest.raises(SolverError) as err:
        krylov_solve(K, F, cfg=SolverConfig(max_iterations=2))
    assert err.value.residual > 1e-10 and err.value.iterations == 2


def test_cg_rejects_indefinite():
    with pytest.raises(SolverError):
        conjugate_gradient(sp.csr_matrix(np.diag([1.0, -1.0])), np.ones(2), jacobi=False)


def test_cg_residual_history_non_increasing_within_slack():
    space = FeSpace(uniform_refine(uniform_refine(lshape_mesh())), 2)
    K, F = apply_dirichlet(assemble_operator(space, CoefficientField()), assemble_load(space, 1.0), space)
    _, st = krylov_solve(K, F)
    h = np.array(st.history)
    assert np.all(h[1:] <= 10 * h[:-1])


@pytest.mark.parametrize("kw", [dict(method="gmres"), dict(tol=0.0), dict(tol=1.0),
                                dict(max_iterations=0)])
def test_solver_config_validation(kw):
    with pytest.raises(ValueError):
        SolverConfig(**kw)


# -- linear problems ----------------------------------------------------------

def _source_problem(f, mesh=square_mesh):
    return ProblemSpec("src", Variant.BOUNDARY_VALUE, CoefficientField(A=1.0, f=f), mesh)


def test_zero_data_zero_solution():
    u = solve_linear_problem(_source_problem(0.0), FeSpace(square_mesh(3), 2))
    assert np.array_equal(u.coefficients, np.zeros_like(u.coefficients))


def test_hand_assembled_single_interior_dof():
    p = _source_problem(1.0)
    u = solve_linear_problem(p, FeSpace(square_mesh(1), 1))
    assert np.all(u.coefficients == 0)
    # one interior vertex: K_cc = 4 (five-point stencil), F_c = 6 * (1/8) / 3
    u = solve_linear_problem(p, FeSpace(square_mesh(2), 1))
    assert np.isclose(u.coefficients[4], 1 / 16, rtol=1e-12)


def test_conv_diffusion_matches_direct_solve():
    p = catalog("conv_diffusion_2d")
    space = FeSpace(uniform_refine(p.initial_mesh()), 2)
    u, st = solve_linear_problem(p, space, return_stats=True)
    assert st.method == "bicgstab" and st.converged
    K = assemble_operator(space, p.coefficients)
    x, y, _ = quadrature_points(space)
    F = assemble_load(space, p.coefficients.scalar("f", x, y))
    g = space.interpolate(p.dirichlet).coefficients
    Ke, Fe = apply_dirichlet(K, F, space, g)
    ref = spla.spsolve(Ke.tocsc(), Fe)
    assert np.max(np.abs(u.coefficients - ref)) <= 1e-8 * np.max(np.abs(ref))


def test_galerkin_orthogonality():
    p = catalog("lshape_poisson")
    space = FeSpace(uniform_refine(uniform_refine(p.initial_mesh())), 1)
    u = solve_linear_problem(p, space)
    K = assemble_operator(space, p.coefficients)
    res = (K @ u.coefficients)[~space.boundary_dofs]
    assert np.linalg.norm(res) <= 1e-9


def test_transferred_guess_and_determinism():
    p = catalog("lshape_poisson")
    coarse = FeSpace(uniform_refine(p.initial_mesh()), 1)
    fine = FeSpace(uniform_refine(coarse.mesh), 1)
    u0 = solve_linear_problem(p, coarse)
    a, sa = solve_linear_problem(p, fine, u0, return_stats=True)
    b, sb = solve_linear_problem(p, fine, u0, return_stats=True)
    assert np.array_equal(a.coefficients, b.coefficients)
    _, cold = solve_linear_problem(p, fine, return_stats=True)
    assert sa.iterations <= cold.iterations


# -- Newton -------------------------------------------------------------------

def test_newton_trivial_solution():
    p = ProblemSpec("cube", Variant.NONLINEAR, CoefficientField(A=1.0), square_mesh,
                    nonlinearity=lambda x, y, u: u ** 3, nonlinearity_du=lambda x, y, u: 3 * u ** 2)
    u, st = solve_nonlinear_problem(p, FeSpace(square_mesh(3), 1))
    assert st.iterations <= 1 and np.all(u.coefficients == 0)


def test_newton_quadratic_convergence():
    p = catalog("nonlinear_sine_2d")
    space = FeSpace(uniform_refine(uniform_refine(p.initial_mesh())), 1)
    u, st = solve_nonlinear_problem(p, space)
    r = np.array(st.residuals)
    assert r[-1] <= 1e-10
    assert np.linalg.norm(nonlinear_residual(p, u)) <= 1e-10
    for a, b in zip(r[:-1], r[1:]):
        if a < 1e-4 and b > 1e-12:
            assert b / a ** 2 < 1e4


def test_newton_failure_signalled():
    p = catalog("nonlinear_sine_2d")
    with pytest.raises(SolverError):
        solve_nonlinear_problem(p, FeSpace(square_mesh(6), 1), cfg=NewtonConfig(tol=1e-30))


# -- eigenvalues --------------------------------------------------------------

def test_square_eigenvalue_on_32_vertex_grid():
    p = catalog("square_laplace_eigen")
    space = FeSpace(square_mesh(31), 1)
    lam, u = solve_eigen_problem(p, space)
    assert np.pi ** 2 < lam < np.pi ** 2 + 0.1
    M = assemble_mass(space)
    assert abs(u.coefficients @ (M @ u.coefficients) - 1) <= 1e-12
    assert assemble_load(space, 1.0) @ u.coefficients > 0


def test_two_by_two_generalized_problem():
    # a 3 x 2 grid has two interior vertices
    xs, ys = np.meshgrid(np.linspace(0, 1, 4), np.linspace(0, 1, 3))
    verts = np.stack([xs.ravel(), ys.ravel()], axis=1)
    idx = np.arange(12).reshape(3, 4)
    a, b, c, d = idx[:-1, :-1].ravel(), idx[:-1, 1:].ravel(), idx[1:, 1:].ravel(), idx[1:, :-1].ravel()
    tris = np.concatenate([np.stack([a, b, c], 1), np.stack([a, c, d], 1)])
    mesh = load_initial(verts, tris)
    p = catalog("square_laplace_eigen")
    space = FeSpace(mesh, 1)
    inner = np.flatnonzero(~space.boundary_dofs)
    assert len(inner) == 2
    K = assemble_operator(space, p.coefficients).toarray()[np.ix_(inner, inner)]
    M = assemble_mass(space).toarray()[np.ix_(inner, inner)]
    # det(K - lam M) = 0 as a quadratic in lam
    qa = np.linalg.det(M)
    qb = -(K[0, 0] * M[1, 1] + K[1, 1] * M[0, 0] - K[0, 1] * M[1, 0] - K[1, 0] * M[0, 1])
    qc = np.linalg.det(K)
    roots = np.roots([qa, qb, qc])
    lam, _ = solve_eigen_problem(p, space)
    assert abs(lam - roots.min()) <= 1e-9 * roots.min()


def test_constant_potential_shifts_eigenvalue():
    space = FeSpace(square_mesh(6), 1)
    base = ProblemSpec("v0", Variant.EIGENVALUE, CoefficientField(A=0.5), square_mesh)
    shifted = ProblemSpec("v", Variant.EIGENVALUE, CoefficientField(A=0.5, c=50.0), square_mesh)
    l0, _ = solve_eigen_problem(base, space)
    l1, _ = solve_eigen_problem(shifted, space)
    assert abs(l1 - l0 - 50.0) <= 1e-8


def test_eigen_non_convergence_signalled():
    p = catalog("singular_potential_eigen")
    with pytest.raises(SolverError):
        solve_eigen_problem(p, FeSpace(uniform_refine(p.initial_mesh()), 1),
                            cfg=EigenConfig(max_iterations=2))


def test_dispatch():
    for pid in ("lshape_poisson", "nonlinear_sine_2d", "square_laplace_eigen"):
        p = catalog(pid)
        u, lam, its, _ = solve(p, FeSpace(p.initial_mesh(), 1))
        assert isinstance(u, FeFunction) and (lam is None) == (pid != "square_laplace_eigen")
        assert its >= 0
    with pytest.raises(ValueError):
        solve_linear_problem(catalog("square_laplace_eigen"), FeSpace(square_mesh(2), 1))


@pytest.mark.parametrize("cls,kw", [(NewtonConfig, dict(damping=0.0)), (NewtonConfig, dict(tol=0.0)),
                                    (EigenConfig, dict(tol=-1.0)), (EigenConfig, dict(max_iterations=0))])
def test_outer_config_validation(cls, kw):
    with pytest.raises(ValueError):
        cls(**kw)
