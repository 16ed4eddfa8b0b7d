import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from minres_wp.assembly import ProblemSpec, discretize
from minres_wp.kacanov import initial_state, kacanov_step
from minres_wp.mesh import generate_unit_interval, generate_unit_square, refine
from minres_wp.problems import (
    ExperimentId,
    eriksson_exact,
    eriksson_exponents,
    galerkin_solve,
    initial_mesh,
    l2_error,
    line_profile,
    locate,
    make_problem,
    minres_l2_solve,
    staged_epsilon,
)
from minres_wp.spaces import FeFunction, build_space, interpolate


def _spaces(prob, mesh):
    U = build_space(mesh, 1, prob.dirichlet_parts)
    V = build_space(mesh, 2, [(label, 0.0) for label, _ in prob.dirichlet_parts])
    return U, V


def test_experiment_ids():
    assert ExperimentId("exp1").dim == 1 and ExperimentId("exp2").dim == 2
    for bad in (("eriksson", None), ("eriksson", 0.0), ("exp1", 1e-3), ("exp9", None)):
        with pytest.raises(ValueError):
            ExperimentId(*bad)


def test_eriksson_exponents():
    s1, s2 = eriksson_exponents(1e-3)
    assert s1 == pytest.approx(1000.00987, abs=1e-5)
    assert s2 == pytest.approx(-0.0098697, rel=1e-4)
    # both satisfy the characteristic equation
    for s in (s1, s2):
        assert 1e-3 * s * s - s - 1e-3 * np.pi ** 2 == pytest.approx(0.0, abs=1e-9 * s1)


@pytest.mark.parametrize("eps", [1e-1, 1e-3, 1e-6])
def test_eriksson_boundary_values(eps):
    u = eriksson_exact(eps)
    y = np.linspace(0, 1, 11)
    assert np.allclose(u(np.column_stack([np.ones_like(y), y])), 0.0, atol=1e-12)
    assert np.allclose(u(np.column_stack([np.zeros_like(y), y])), np.sin(np.pi * y), atol=1e-12)


def test_eriksson_solves_pde():
    eps = 1e-1
    u = eriksson_exact(eps)
    x = np.array([[0.3, 0.4], [0.7, 0.2]])
    h = 1e-4
    ex, ey = np.array([h, 0]), np.array([0, h])
    lap = (u(x + ex) + u(x - ex) + u(x + ey) + u(x - ey) - 4 * u(x)) / h ** 2
    ux = (u(x + ex) - u(x - ex)) / (2 * h)
    assert np.allclose(-eps * lap + ux, 0.0, atol=1e-5)


def test_problem_definitions():
    p1 = make_problem(ExperimentId("exp1"))
    assert (p1.epsilon, p1.beta, p1.c) == (0.0, (1.0,), 1.0)
    assert np.allclose(p1.exact(np.array([[0.0], [1.0]])), [0.0, 1 - np.exp(-1)])
    p2 = make_problem(ExperimentId("exp2"))
    assert [label for label, _ in p2.dirichlet_parts] == ["left", "right"]
    p3 = make_problem(ExperimentId("eriksson", 1e-3))
    assert p3.c == 0.0 and p3.epsilon == 1e-3 and len(p3.dirichlet_parts) == 4


def test_staged_epsilon():
    assert staged_epsilon(500) == 1e-2
    assert staged_epsilon(1000) == 1e-3
    assert staged_epsilon(5000) == 1e-4
    assert staged_epsilon(10000) == 1e-5
    assert staged_epsilon(50000) == 1e-6
    with pytest.raises(ValueError):
        staged_epsilon(-1)


@settings(max_examples=100, deadline=None)
@given(st.integers(0, 10 ** 6), st.integers(0, 10 ** 6))
def test_staged_epsilon_monotone(a, b):
    lo, hi = min(a, b), max(a, b)
    assert staged_epsilon(hi) <= staged_epsilon(lo)


def test_galerkin_pure_diffusion_nodally_exact():
    prob = ProblemSpec(1, 1.0, (0.0,), 0.0, 1.0, (("left", 0.0), ("right", 0.0)))
    U = build_space(generate_unit_interval(10), 1, prob.dirichlet_parts)
    res = galerkin_solve(prob, U)
    x = U.dof_coords[:, 0]
    assert res.status == "ok"
    assert np.allclose(res.u.coefficients, x * (1 - x) / 2, atol=1e-10)
    assert np.all(res.indicators >= 0)


def test_galerkin_zero_data():
    prob = ProblemSpec(2, 1e-2, (1.0, 0.0), 0.0, 0.0, (("left", 0.0),))
    U = build_space(generate_unit_square(3), 1, prob.dirichlet_parts)
    res = galerkin_solve(prob, U)
    assert np.allclose(res.u.coefficients, 0.0)


def test_galerkin_singular_reported():
    # no boundary condition and no reaction: constants are in the kernel
    prob = ProblemSpec(1, 1.0, (0.0,), 0.0, 1.0, ())
    res = galerkin_solve(prob, build_space(generate_unit_interval(4), 1))
    assert res.status == "solver_failure" and res.u is None


def test_galerkin_facet_term_2d():
    prob = make_problem(ExperimentId("eriksson", 1e-1))
    U = build_space(generate_unit_square(4), 1, prob.dirichlet_parts)
    res = galerkin_solve(prob, U)
    assert res.status == "ok" and np.all(res.indicators >= 0) and res.indicators.sum() > 0


def test_minres_l2_equals_first_wp_iterate():
    e = ExperimentId("exp1")
    prob = make_problem(e)
    m = initial_mesh(e, 32)
    U, V = _spaces(prob, m)
    res = minres_l2_solve(prob, U, V)
    s = kacanov_step(initial_state(discretize(m, prob), (1e-2, 1e2), 100))
    assert np.max(np.abs(res.u.coefficients - s.u.coefficients)) <= 1e-9
    assert np.all(res.indicators >= 0)
    # fast decay on the first interval
    assert res.u.coefficients[1] < 0.5 * prob.exact(U.dof_coords[1:2])[0]


def test_minres_l2_exact_data():
    prob = ProblemSpec(1, 1.0, (0.0,), 0.0, 0.0, (("left", 0.0), ("right", 1.0)))
    m = generate_unit_interval(6)
    U, V = _spaces(prob, m)
    res = minres_l2_solve(prob, U, V)
    assert np.allclose(res.u.coefficients, U.dof_coords[:, 0], atol=1e-12)
    assert np.allclose(res.psi.coefficients, 0.0, atol=1e-12)


def test_l2_error_examples():
    m = generate_unit_square(3)
    V = build_space(m, 2)
    g = lambda x: x[:, 0] * x[:, 1] + x[:, 1] ** 2  # noqa: E731
    assert l2_error(interpolate(g, V), g) <= 1e-13
    assert l2_error(FeFunction(V, np.zeros(V.ndof)), 1.0) == pytest.approx(1.0)
    U = build_space(generate_unit_interval(32), 1)
    exact = lambda x: 1 - np.exp(-x[:, 0])  # noqa: E731
    err = l2_error(interpolate(exact, U), exact)
    # independent value: dense midpoint sampling of the piecewise linear error
    xs = (np.arange(320000) + 0.5) / 320000
    nodes = np.linspace(0, 1, 33)
    ref = np.sqrt(np.mean((np.interp(xs, nodes, 1 - np.exp(-nodes)) - (1 - np.exp(-xs))) ** 2))
    assert err == pytest.approx(ref, rel=1e-4)
    assert err <= 1.5e-4


def test_l2_interpolation_order():
    exact = lambda x: 1 - np.exp(-x[:, 0])  # noqa: E731
    errs = [l2_error(interpolate(exact, build_space(generate_unit_square(n), 1)), exact) for n in (4, 8, 16)]
    rates = np.log2(np.array(errs[:-1]) / np.array(errs[1:]))
    assert np.all(rates >= 1.8)


def test_line_profile():
    m = refine(generate_unit_square(3), [0, 7])
    V = build_space(m, 2)
    prof = line_profile(FeFunction(V, np.full(V.ndof, 2.5)), "x", 0.5, 9)
    assert np.allclose(prof[:, 1], 2.5)
    U = build_space(generate_unit_interval(4), 1, [("left", 0.0), ("right", 0.0)])
    u = FeFunction(U, np.array([0.0, 1.0, 2.0, 1.0, 0.0]))
    prof = line_profile(u, samples=2)
    assert np.allclose(prof[:, 1], 0.0)
    exact = lambda x: 1 - np.exp(-x[:, 0])  # noqa: E731
    prof = line_profile(interpolate(exact, build_space(generate_unit_square(16), 1)), "x", 0.5, 41)
    assert np.allclose(prof[:, 1], 1 - np.exp(-prof[:, 0]), atol=2e-3)
    with pytest.raises(ValueError):
        line_profile(u, "x", 1.5)
    with pytest.raises(ValueError):
        locate(m, [2.0, 0.5])
