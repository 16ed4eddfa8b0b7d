import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from minres_wp.mesh import (
    dorfler_mark,
    dump_mesh,
    generate_unit_interval,
    generate_unit_square,
    load_mesh,
    refine,
    refine_uniform,
)


def test_unit_square_counts():
    m = generate_unit_square(4)
    assert m.n_elements == 32 and m.n_vertices == 25
    assert np.isclose(m.volumes.sum(), 1.0)
    assert np.all(m.signed_volumes > 0)
    assert m.is_conforming()
    assert sorted(set(m.boundary_labels.tolist())) == ["bottom", "left", "right", "top"]


def test_unit_interval():
    m = generate_unit_interval(5)
    assert m.n_elements == 5 and np.isclose(m.volumes.sum(), 1.0)
    assert m.is_conforming()


def test_invalid_meshes_rejected():
    from minres_wp.mesh import Mesh
    with pytest.raises(ValueError):
        generate_unit_interval(0)
    flat = np.array([[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]])
    with pytest.raises(ValueError):
        Mesh(flat, [[0, 1, 2]], [[0, 1]], ["bottom"])


def test_refine_uniform_halves_h():
    m = generate_unit_square(2)
    r = refine_uniform(m)
    assert r.n_elements == 4 * m.n_elements
    assert np.isclose(r.diameters.max(), 0.5 * m.diameters.max())
    assert np.all(r.parent >= 0) and r.parent.max() == m.n_elements - 1
    assert np.all(np.bincount(r.parent) == 4)
    r1 = refine_uniform(generate_unit_interval(4))
    assert r1.n_elements == 8


def test_marked_element_is_split_and_closure_conforms():
    m = generate_unit_square(3)
    r = refine(m, [4])
    assert r.is_conforming()
    assert np.count_nonzero(r.parent == 4) >= 2
    # children of an element cover exactly its area
    for e in range(m.n_elements):
        assert np.isclose(r.volumes[r.parent == e].sum(), m.volumes[e])


@settings(max_examples=25, deadline=None)
@given(st.lists(st.integers(0, 10_000), min_size=1, max_size=6), st.integers(1, 3))
def test_random_refinement_stays_conforming(picks, n):
    m = generate_unit_square(n)
    for k in picks:
        m = refine(m, [k % m.n_elements])
    assert m.is_conforming()
    assert np.isclose(m.volumes.sum(), 1.0)
    assert np.all(m.signed_volumes > 0)
    # newest-vertex bisection keeps shape regularity bounded
    ratio = m.diameters ** 2 / m.volumes
    assert ratio.max() <= 8.0 + 1e-9


def test_refine_1d_parent_links():
    m = generate_unit_interval(4)
    r = refine(m, [1, 3])
    assert r.n_elements == 6
    assert r.parent.tolist() == [0, 1, 1, 2, 3, 3]
    assert r.is_conforming()


def test_dorfler_examples():
    assert dorfler_mark([3, 2, 2, 1], 0.6).tolist() == [0, 1]
    assert dorfler_mark([4, 1, 1], 0.5).tolist() == [0]
    assert dorfler_mark([0, 0, 0], 0.5).tolist() == [0]
    assert dorfler_mark([1, 1, 1, 1], 1.0).tolist() == [0, 1, 2, 3]
    with pytest.raises(ValueError):
        dorfler_mark([1, -1], 0.5)
    with pytest.raises(ValueError):
        dorfler_mark([1, 1], 0.0)


@settings(max_examples=60, deadline=None)
@given(st.lists(st.floats(0, 10), min_size=1, max_size=30), st.floats(0.05, 1.0))
def test_dorfler_minimal_bulk(eta, theta):
    eta = np.array(eta)
    marked = dorfler_mark(eta, theta)
    total = eta.sum()
    if total == 0:
        return
    chosen = eta[marked].sum()
    assert chosen >= theta * total * (1 - 1e-12)
    # no smaller set reaches the bulk: dropping the weakest marked element fails
    weakest = eta[marked].min()
    if marked.size > 1:
        assert chosen - weakest < theta * total * (1 + 1e-12)
    # greedy: every unmarked indicator is at most the weakest marked one
    rest = np.setdiff1d(np.arange(eta.size), marked)
    assert np.all(eta[rest] <= weakest)


def test_dump_load_roundtrip():
    m = refine(generate_unit_square(2), [0])
    m2 = load_mesh(dump_mesh(m))
    assert np.array_equal(m.elements, m2.elements)
    assert np.allclose(m.vertices, m2.vertices)
    assert m2.boundary_labels.tolist() == m.boundary_labels.tolist()
