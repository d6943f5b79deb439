import csv

import numpy as np
import pytest
import sympy as sy
from hypothesis import given, strategies as st

from afem.estimator import (
    coefficient_oscillation, divergence_flux, global_estimate, indicators, oscillation,
    write_indicators,
)
from afem.fem import CoefficientField, FeFunction, FeSpace
from afem.fem.quadrature import TRIANGLE_RULE
from afem.fem.space import map_points
from afem.mesh import load_initial, lshape_mesh, refine, square_mesh, uniform_refine
from afem.problems import ProblemSpec, Variant, catalog
from afem.solver import solve

REF = ([[0, 0], [1, 0], [0, 1]], [[0, 1, 2]])


def source(f, A=1.0, mesh=square_mesh, **kw):
    return ProblemSpec("test", Variant.BOUNDARY_VALUE, CoefficientField(A=A, f=f, **kw), mesh)


def test_zero_problem_zero_indicators():
    space = FeSpace(square_mesh(3), 2)
    ind = indicators(source(0.0), space.zero())
    assert np.all(ind.eta2 == 0) and ind.total_eta2 == 0 and ind.eta == 0


def test_two_triangle_square_unit_source():
    # h^2 = 2, area 1/2, no gradient hence no jumps
    ind = indicators(source(1.0), FeSpace(square_mesh(1), 1).zero())
    assert np.allclose(ind.eta2, [1.0, 1.0], atol=1e-14)
    assert ind.num_elements == 2 and ind.num_dofs == 4


def test_linear_function_has_no_jump():
    space = FeSpace(square_mesh(1), 1)
    u = space.interpolate(lambda x, y: 3 * x - 2 * y)
    ind = indicators(source(0.0), u)
    assert np.max(ind.eta2) <= 1e-28


def test_kinked_function_jump_by_hand():
    # u = max(x, y) on the two-triangle square: gradient jumps by (1,-1) across
    # the diagonal; normal jump sqrt(2), edge length sqrt(2), term h_e * h_e * 2
    space = FeSpace(square_mesh(1), 1)
    u = space.interpolate(lambda x, y: np.maximum(x, y))
    ind = indicators(source(0.0), u)
    assert np.allclose(ind.eta2, [4.0, 4.0], atol=1e-13)
    assert ind.total_eta2 == pytest.approx(8.0)


def test_linear_residual_oscillation_matches_moments():
    x, y = sy.symbols("x y")
    mean = sy.integrate(sy.integrate(x, (y, 0, 1 - x)), (x, 0, 1)) / sy.Rational(1, 2)
    dev = sy.integrate(sy.integrate((x - mean) ** 2, (y, 0, 1 - x)), (x, 0, 1))
    full = sy.integrate(sy.integrate(x ** 2, (y, 0, 1 - x)), (x, 0, 1))
    assert mean == sy.Rational(1, 3) and dev == sy.Rational(1, 36)
    mesh = load_initial(*REF)
    ind = indicators(source(lambda x, y: x), FeSpace(mesh, 1).zero())
    h2 = 2.0
    assert abs(ind.osc2[0] - h2 * float(dev)) <= 1e-12
    assert abs(ind.osc2[0] - 1 / 18) <= 1e-12
    assert abs(ind.eta2[0] - h2 * float(full)) <= 1e-12


def test_constant_residual_no_element_oscillation():
    mesh = load_initial(*REF)
    ind = indicators(source(3.0), FeSpace(mesh, 1).zero())
    assert ind.osc2[0] <= 1e-28 and ind.eta2[0] > 0
    # degree 2 projects onto P1: a linear residual has no oscillation
    ind = indicators(source(lambda x, y: 1 + x - 2 * y), FeSpace(mesh, 2).zero())
    assert ind.osc2[0] <= 1e-28


@given(seed=st.integers(0, 2 ** 31), deg=st.sampled_from([1, 2]),
       pid=st.sampled_from(["lshape_poisson", "conv_diffusion_2d", "square_laplace_eigen"]))
def test_oscillation_bounded_by_indicator(seed, deg, pid):
    p = catalog(pid)
    space = FeSpace(uniform_refine(p.initial_mesh()), deg)
    rng = np.random.default_rng(seed)
    u = FeFunction(space, rng.standard_normal(space.num_dofs))
    lam = 1.0 if p.variant is Variant.EIGENVALUE else None
    ind = indicators(p, u, lam)
    assert np.all(ind.osc2 >= 0) and np.all(ind.osc2 <= ind.eta2 * (1 + 1e-12) + 1e-300)
    assert abs(ind.total_eta2 - ind.eta2.sum()) <= 1e-12 * ind.total_eta2
    assert np.array_equal(oscillation(p, u, lam), ind.osc2)


def test_global_estimate_subsets():
    p = catalog("lshape_poisson")
    space = FeSpace(uniform_refine(p.initial_mesh()), 1)
    u, *_ = solve(p, space)
    ind = indicators(p, u)
    eta, osc = global_estimate(ind)
    assert eta == pytest.approx(np.sqrt(ind.eta2.sum()), rel=1e-12)
    assert global_estimate(ind, [3])[0] == pytest.approx(np.sqrt(ind.eta2[3]))
    a, b = np.arange(5), np.arange(5, ind.num_elements)
    ea, eb = global_estimate(ind, a)[0], global_estimate(ind, b)[0]
    assert ea ** 2 + eb ** 2 == pytest.approx(eta ** 2, rel=1e-12)


@pytest.mark.parametrize("deg", [1, 2])
def test_exact_discrete_solution_has_vanishing_estimator(deg):
    if deg == 1:
        exact, f = (lambda x, y: 1 + 2 * x - y), 0.0
    else:
        exact, f = (lambda x, y: x * x + 3 * y * y - x * y), -8.0
    p = ProblemSpec("exact", Variant.BOUNDARY_VALUE, CoefficientField(A=1.0, f=f),
                    lambda: square_mesh(2), dirichlet=exact)
    space = FeSpace(refine(square_mesh(2), [0, 5]), deg)
    u, *_ = solve(p, space)
    ind = indicators(p, u)
    assert ind.eta <= 1e-8 * np.linalg.norm(u.coefficients)


def test_divergence_flux_variable_coefficient():
    # A = (1 + x) I, u = x^2 + y^2: div(A grad u) = 2x + 4(1 + x)
    space = FeSpace(square_mesh(3), 2)
    u = space.interpolate(lambda x, y: x * x + y * y)
    xy = map_points(space.mesh, TRIANGLE_RULE.points)
    expected = 2 * xy[..., 0] + 4 * (1 + xy[..., 0])
    fd = divergence_flux(CoefficientField(A=lambda x, y: 1 + x), u)
    given_div = divergence_flux(CoefficientField(A=lambda x, y: 1 + x,
                                                 div_A=lambda x, y: np.stack([1 + 0 * x, 0 * x], -1)), u)
    assert np.max(np.abs(given_div - expected)) <= 1e-12
    assert np.max(np.abs(fd - expected)) <= 1e-6


def test_coefficient_oscillation_examples():
    mesh = load_initial(*REF)
    const = coefficient_oscillation(CoefficientField(A=2.0), square_mesh(3))
    assert const[1] == 0 and np.all(const[0] == 0)

    def A(x, y):
        one, zero = np.ones_like(x), np.zeros_like(x)
        return np.stack([np.stack([1 + x, zero], -1), np.stack([zero, one], -1)], -2)
    co = CoefficientField(A=A)
    per, top = coefficient_oscillation(co, mesh)
    assert top == pytest.approx(0.5, abs=1e-9) and per.shape == (1,)
    # two bisection generations halve every length, hence the value
    m = square_mesh(4)
    values = []
    for _ in range(3):
        values.append(coefficient_oscillation(co, m)[1])
        m = uniform_refine(uniform_refine(m))
    assert values[1] == pytest.approx(values[0] / 2, rel=1e-9)
    assert values[2] == pytest.approx(values[1] / 2, rel=1e-9)


def test_indicator_dump(tmp_path):
    p = catalog("lshape_poisson")
    space = FeSpace(lshape_mesh(), 1)
    u, *_ = solve(p, space)
    ind = indicators(p, u)
    path = tmp_path / "ind.csv"
    write_indicators(ind, path)
    rows = list(csv.reader(path.open()))
    assert rows[0] == ["element_id", "eta2", "osc2"]
    assert len(rows) == ind.num_elements + 1
    assert [float(r[1]) for r in rows[1:]] == ind.eta2.tolist()


def test_indicators_are_read_only():
    p = catalog("lshape_poisson")
    ind = indicators(p, FeSpace(lshape_mesh(), 1).zero())
    with pytest.raises(ValueError):
        ind.eta2[0] = 1.0
