import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from minres_wp.mesh import generate_unit_interval, generate_unit_square, refine
from minres_wp.spaces import basis, build_space, eval_function, evaluate_on_elements, interpolate


@pytest.mark.parametrize("dim,degree", [(1, 1), (1, 2), (2, 1), (2, 2)])
def test_partition_of_unity(dim, degree):
    rng = np.random.default_rng(0)
    lam = rng.dirichlet(np.ones(dim + 1), size=7)
    phi, dphi = basis(dim, degree, lam)
    assert np.allclose(phi.sum(axis=1), 1.0)
    # derivative of the constant 1 along any admissible barycentric direction vanishes
    assert np.allclose((dphi.sum(axis=1))[:, 1:] - (dphi.sum(axis=1))[:, :1], 0.0)


def test_p2_nodal_basis():
    nodes = np.array([[1, 0, 0], [0, 1, 0], [0, 0, 1], [0, .5, .5], [.5, 0, .5], [.5, .5, 0]])
    phi, _ = basis(2, 2, nodes)
    assert np.allclose(phi, np.eye(6))


def test_dof_counts():
    m = generate_unit_square(3)
    assert build_space(m, 1).ndof == 16
    assert build_space(m, 2).ndof == 16 + m.edges.shape[0] == 49
    assert build_space(generate_unit_interval(4), 2).ndof == 9


def test_dirichlet_parts():
    m = generate_unit_square(2)
    V = build_space(m, 2, [("left", 1.0), ("right", 0.0)])
    x = V.dof_coords[V.constrained_dofs]
    assert np.all((x[:, 0] == 0) | (x[:, 0] == 1))
    assert V.constrained_dofs.size == 10
    assert np.allclose(V.constrained_values[x[:, 0] == 0], 1.0)
    with pytest.raises(ValueError):
        build_space(m, 1, [("nowhere", 0.0)])


@settings(max_examples=20, deadline=None)
@given(st.lists(st.floats(-2, 2), min_size=6, max_size=6), st.integers(0, 7))
def test_quadratics_reproduced(coef, mark):
    a = coef
    g = lambda x: a[0] + a[1] * x[:, 0] + a[2] * x[:, 1] + a[3] * x[:, 0] ** 2 + a[4] * x[:, 0] * x[:, 1] + a[5] * x[:, 1] ** 2  # noqa: E731
    dg = lambda x: np.column_stack([a[1] + 2 * a[3] * x[:, 0] + a[4] * x[:, 1], a[2] + a[4] * x[:, 0] + 2 * a[5] * x[:, 1]])  # noqa: E731
    m = refine(generate_unit_square(2), [mark])
    V = build_space(m, 2)
    f = interpolate(g, V)
    data = V.element_data()
    vals, grads = evaluate_on_elements(f, data)
    pts = data.points.reshape(-1, 2)
    assert np.allclose(vals.reshape(-1), g(pts), atol=1e-12)
    assert np.allclose(grads.reshape(-1, 2), dg(pts), atol=1e-11)
    v0, g0 = eval_function(f, 3, [0.2, 0.3])
    x0 = m.vertices[m.elements[3]]
    p = x0[0] + 0.2 * (x0[1] - x0[0]) + 0.3 * (x0[2] - x0[0])
    assert np.isclose(v0, g(p[None])[0]) and np.allclose(g0, dg(p[None])[0])


def test_quadrature_measure():
    m = refine(generate_unit_square(3), [0, 5])
    data = build_space(m, 1).element_data()
    assert np.isclose(data.dx.sum(), 1.0)
    assert np.allclose(data.dx.sum(axis=1), m.volumes)
