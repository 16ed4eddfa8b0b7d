"""Conforming simplicial meshes in 1D and 2D.

Meshes are immutable values. ``refine`` returns a new mesh whose elements
carry a link to the element of the source mesh they were cut from, which is
what the sigma transfer in :mod:`minres_wp.adaptivity` relies on.

2D elements are stored with the refinement edge between local vertices 0 and
1, so local vertex 2 is always the newest vertex. Bisection of ``(a, b, c)``
at the midpoint ``m`` of ``ab`` produces ``(c, a, m)`` and ``(b, c, m)``,
which keeps the orientation positive.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

__all__ = [
    "Mesh",
    "generate_unit_interval",
    "generate_unit_square",
    "dorfler_mark",
    "refine",
    "refine_uniform",
    "dump_mesh",
    "load_mesh",
]


def _readonly(a, dtype):
    a = np.array(a, dtype=dtype)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Mesh:
    """Simplicial mesh of an interval or a polygon.

    Attributes
    ----------
    vertices : (nv, dim) float array
    elements : (ne, dim+1) int array, positively oriented
    boundary_facets : (nb, dim) int array of facet vertex ids
    boundary_labels : (nb,) array of boundary-part names
    refinement_edge : (ne,) local edge index (2D only; edge ``i`` is opposite
        vertex ``i``). Always 2 after normalisation.
    parent : (ne,) id of the source-mesh element this one came from, -1 on an
        initial mesh.
    child_slot : (ne,) position among the children of ``parent``; -1 when the
        element was carried over unrefined (or on an initial mesh).
    """

    vertices: np.ndarray
    elements: np.ndarray
    boundary_facets: np.ndarray
    boundary_labels: np.ndarray
    refinement_edge: np.ndarray | None = None
    parent: np.ndarray | None = None
    child_slot: np.ndarray | None = None
    _checked: bool = field(default=False, repr=False)

    def __post_init__(self):
        verts = np.asarray(self.vertices, dtype=float)
        if verts.ndim == 1:
            verts = verts[:, None]
        dim = verts.shape[1]
        if dim not in (1, 2):
            raise ValueError(f"unsupported mesh dimension {dim}")
        elems = np.asarray(self.elements, dtype=np.int64).reshape(-1, dim + 1)
        bfac = np.asarray(self.boundary_facets, dtype=np.int64).reshape(-1, dim)
        labels = np.asarray(self.boundary_labels, dtype=object).reshape(-1)
        if labels.shape[0] != bfac.shape[0]:
            raise ValueError("one label per boundary facet required")
        ne = elems.shape[0]

        if dim == 2:
            redge = (np.full(ne, 2, dtype=np.int64) if self.refinement_edge is None
                     else np.asarray(self.refinement_edge, dtype=np.int64))
            # rotate each triangle so its refinement edge is local edge 2
            shift = (redge - 2) % 3
            idx = (np.arange(3)[None, :] + shift[:, None]) % 3
            elems = np.take_along_axis(elems, idx, axis=1)
            redge = np.full(ne, 2, dtype=np.int64)
        else:
            redge = None

        parent = (np.full(ne, -1, dtype=np.int64) if self.parent is None
                  else np.asarray(self.parent, dtype=np.int64))
        slot = (np.full(ne, -1, dtype=np.int64) if self.child_slot is None
                else np.asarray(self.child_slot, dtype=np.int64))

        set_ = object.__setattr__
        set_(self, "vertices", _readonly(verts, float))
        set_(self, "elements", _readonly(elems, np.int64))
        set_(self, "boundary_facets", _readonly(bfac, np.int64))
        set_(self, "boundary_labels", _readonly(labels, object))
        set_(self, "refinement_edge", None if redge is None else _readonly(redge, np.int64))
        set_(self, "parent", _readonly(parent, np.int64))
        set_(self, "child_slot", _readonly(slot, np.int64))

        if np.any(self.volumes <= 0.0):
            bad = int(np.flatnonzero(self.volumes <= 0.0)[0])
            raise ValueError(f"element {bad} has non-positive volume")

    @property
    def dim(self) -> int:
        return self.vertices.shape[1]

    @property
    def n_vertices(self) -> int:
        return self.vertices.shape[0]

    @property
    def n_elements(self) -> int:
        return self.elements.shape[0]

    @cached_property
    def signed_volumes(self) -> np.ndarray:
        x = self.vertices[self.elements]
        if self.dim == 1:
            return x[:, 1, 0] - x[:, 0, 0]
        e1 = x[:, 1] - x[:, 0]
        e2 = x[:, 2] - x[:, 0]
        return 0.5 * (e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0])

    @property
    def volumes(self) -> np.ndarray:
        return self.signed_volumes

    @cached_property
    def diameters(self) -> np.ndarray:
        x = self.vertices[self.elements]
        if self.dim == 1:
            return np.abs(x[:, 1, 0] - x[:, 0, 0])
        d = [np.linalg.norm(x[:, i] - x[:, j], axis=1) for i, j in ((0, 1), (1, 2), (2, 0))]
        return np.max(d, axis=0)

    @cached_property
    def labels(self) -> tuple[str, ...]:
        return tuple(sorted(set(self.boundary_labels.tolist())))

    @cached_property
    def _edge_data(self):
        # local edge i is opposite local vertex i
        if self.dim != 2:
            raise AttributeError("edges are only defined for 2D meshes")
        local = np.array([[1, 2], [2, 0], [0, 1]])
        pairs = np.sort(self.elements[:, local], axis=2).reshape(-1, 2)
        edges, first, inverse = np.unique(pairs, axis=0, return_index=True, return_inverse=True)
        # renumber edges by first appearance for a stable, element-ordered numbering
        order = np.argsort(first, kind="stable")
        rank = np.empty_like(order)
        rank[order] = np.arange(order.size)
        edges = edges[order]
        element_edges = rank[inverse.reshape(-1)].reshape(-1, 3)
        return edges, element_edges

    @property
    def edges(self) -> np.ndarray:
        return self._edge_data[0]

    @property
    def element_edges(self) -> np.ndarray:
        return self._edge_data[1]

    @cached_property
    def facet_incidence(self) -> np.ndarray:
        """Number of elements sharing each facet (edges in 2D, vertices in 1D)."""
        if self.dim == 1:
            return np.bincount(self.elements.reshape(-1), minlength=self.n_vertices)
        return np.bincount(self.element_edges.reshape(-1), minlength=self.edges.shape[0])

    @cached_property
    def neighbors(self) -> np.ndarray:
        """(ne, dim+1) neighbour across the facet opposite each local vertex, -1 on the boundary."""
        ne = self.n_elements
        nb = np.full((ne, self.dim + 1), -1, dtype=np.int64)
        if self.dim == 1:
            owner: dict[int, tuple[int, int]] = {}
            for e, (a, b) in enumerate(self.elements):
                for loc, v in ((1, a), (0, b)):  # facet opposite local 1 is vertex a
                    if v in owner:
                        oe, oloc = owner[v]
                        nb[e, loc] = oe
                        nb[oe, oloc] = e
                    else:
                        owner[v] = (e, loc)
            return nb
        seen = np.full(self.edges.shape[0], -1, dtype=np.int64)
        seen_loc = np.full(self.edges.shape[0], -1, dtype=np.int64)
        for e in range(ne):
            for loc in range(3):
                k = self.element_edges[e, loc]
                if seen[k] < 0:
                    seen[k], seen_loc[k] = e, loc
                else:
                    nb[e, loc] = seen[k]
                    nb[seen[k], seen_loc[k]] = e
        return nb

    def is_conforming(self) -> bool:
        """Interior facets are shared by exactly two elements, boundary facets by one."""
        inc = self.facet_incidence
        if self.dim == 1:
            used = inc > 0
            bverts = set(self.boundary_facets[:, 0].tolist())
            ends = {int(v) for v in np.flatnonzero(inc == 1)}
            return bool(np.all(inc[used] <= 2)) and ends == bverts
        if np.any(inc > 2) or np.any(inc == 0):
            return False
        on_boundary = {tuple(sorted(f)) for f in self.boundary_facets.tolist()}
        single = {tuple(e) for e in self.edges[inc == 1].tolist()}
        return single == on_boundary


def generate_unit_interval(n: int) -> Mesh:
    """Uniform partition of (0, 1) into ``n`` elements."""
    if n < 1:
        raise ValueError("n must be >= 1")
    x = np.linspace(0.0, 1.0, n + 1)
    elems = np.column_stack([np.arange(n), np.arange(1, n + 1)])
    return Mesh(x[:, None], elems, [[0], [n]], ["left", "right"])


def generate_unit_square(n: int) -> Mesh:
    """``n x n`` squares, each cut along the (0,0)-(1,1) diagonal.

    The hypotenuse is the refinement edge of both halves, so neighbouring
    triangles across a diagonal are compatibly labelled.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    g = np.linspace(0.0, 1.0, n + 1)
    X, Y = np.meshgrid(g, g, indexing="xy")
    verts = np.column_stack([X.ravel(), Y.ravel()])

    def vid(i, j):
        return j * (n + 1) + i

    elems = []
    for j in range(n):
        for i in range(n):
            sw, se, ne_, nw = vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1)
            elems.append((ne_, sw, se))
            elems.append((sw, ne_, nw))
    facets, labels = [], []
    for i in range(n):
        facets.append((vid(i, 0), vid(i + 1, 0)))
        labels.append("bottom")
        facets.append((vid(i + 1, n), vid(i, n)))
        labels.append("top")
        facets.append((vid(0, i + 1), vid(0, i)))
        labels.append("left")
        facets.append((vid(n, i), vid(n, i + 1)))
        labels.append("right")
    return Mesh(verts, elems, facets, labels)


def dorfler_mark(indicators, theta: float) -> np.ndarray:
    """Smallest greedy set of elements carrying a ``theta`` share of the total.

    Elements are taken in descending indicator order (ties by lower id) until
    the running sum reaches ``theta * total``. An all-zero vector marks
    element 0 so that an adaptive loop still makes progress.
    """
    eta = np.asarray(indicators, dtype=float)
    if not 0.0 < theta <= 1.0:
        raise ValueError("theta must lie in (0, 1]")
    if eta.size == 0:
        return np.zeros(0, dtype=np.int64)
    if np.any(eta < 0) or not np.all(np.isfinite(eta)):
        raise ValueError("indicators must be finite and nonnegative")
    ids = np.arange(eta.size)
    order = np.lexsort((ids, -eta))
    csum = np.cumsum(eta[order])
    total = csum[-1]
    if total == 0.0:
        return np.array([0], dtype=np.int64)
    k = int(np.searchsorted(csum, theta * total, side="left")) + 1
    k = min(k, eta.size)
    return np.sort(order[:k])


def _refine_1d(mesh: Mesh, marked: np.ndarray) -> Mesh:
    verts = [row for row in mesh.vertices]
    elems, parent, slot = [], [], []
    is_marked = np.zeros(mesh.n_elements, dtype=bool)
    is_marked[marked] = True
    for e, (a, b) in enumerate(mesh.elements):
        if is_marked[e]:
            m = len(verts)
            verts.append(0.5 * (mesh.vertices[a] + mesh.vertices[b]))
            elems += [(a, m), (m, b)]
            parent += [e, e]
            slot += [0, 1]
        else:
            elems.append((a, b))
            parent.append(e)
            slot.append(-1)
    return Mesh(np.array(verts), elems, mesh.boundary_facets, mesh.boundary_labels,
                parent=parent, child_slot=slot)


def _refine_2d(mesh: Mesh, marked: np.ndarray) -> Mesh:
    edges, element_edges = mesh.edges, mesh.element_edges
    split = np.zeros(edges.shape[0], dtype=bool)
    split[element_edges[marked, 2]] = True

    # closure: any element with a split edge must split its refinement edge
    while True:
        need = split[element_edges].any(axis=1) & ~split[element_edges[:, 2]]
        if not need.any():
            break
        split[element_edges[need, 2]] = True

    verts = list(mesh.vertices)
    midpoint: dict[tuple[int, int], int] = {}
    edge_key = {tuple(e): k for k, e in enumerate(edges.tolist())}

    def mid(a, b):
        key = (a, b) if a < b else (b, a)
        m = midpoint.get(key)
        if m is None:
            m = len(verts)
            verts.append(0.5 * (mesh.vertices[a] + mesh.vertices[b]))
            midpoint[key] = m
        return m

    def is_split(a, b):
        key = (a, b) if a < b else (b, a)
        k = edge_key.get(key)
        return k is not None and split[k]

    elems, parent, slot = [], [], []
    for e, (a, b, c) in enumerate(mesh.elements.tolist()):
        if not split[element_edges[e, 2]]:
            elems.append((a, b, c))
            parent.append(e)
            slot.append(-1)
            continue
        m = mid(a, b)
        leaves = []
        for child in ((c, a, m), (b, c, m)):
            x, y, z = child
            if is_split(x, y):
                m2 = mid(x, y)
                leaves += [(z, x, m2), (y, z, m2)]
            else:
                leaves.append(child)
        for s, leaf in enumerate(leaves):
            elems.append(leaf)
            parent.append(e)
            slot.append(s)

    facets, labels = [], []
    for (a, b), lab in zip(mesh.boundary_facets.tolist(), mesh.boundary_labels.tolist()):
        if is_split(a, b):
            m = mid(a, b)
            facets += [(a, m), (m, b)]
            labels += [lab, lab]
        else:
            facets.append((a, b))
            labels.append(lab)
    return Mesh(np.array(verts), elems, facets, labels, parent=parent, child_slot=slot)


def refine(mesh: Mesh, marked) -> Mesh:
    """Refine the marked elements; newest-vertex bisection with closure in 2D."""
    marked = np.unique(np.asarray(marked, dtype=np.int64))
    if marked.size and (marked[0] < 0 or marked[-1] >= mesh.n_elements):
        raise ValueError("marked element id out of range")
    if mesh.dim == 1:
        return _refine_1d(mesh, marked)
    return _refine_2d(mesh, marked)


def refine_uniform(mesh: Mesh) -> Mesh:
    """Halve the mesh size: one bisection in 1D, two bisection sweeps in 2D."""
    first = refine(mesh, np.arange(mesh.n_elements))
    if mesh.dim == 1:
        return first
    second = refine(first, np.arange(first.n_elements))
    # collapse the genealogy so parent ids point into the source mesh
    parent = first.parent[second.parent]
    slot = 4 * np.maximum(first.child_slot[second.parent], 0) + np.maximum(second.child_slot, 0)
    return Mesh(second.vertices, second.elements, second.boundary_facets,
                second.boundary_labels, parent=parent, child_slot=slot)


def dump_mesh(mesh: Mesh) -> str:
    """Plain-text dump: header ``dim nv ne``, vertices, elements, boundary facets."""
    lines = [f"{mesh.dim} {mesh.n_vertices} {mesh.n_elements}"]
    lines += [" ".join(repr(float(c)) for c in row) for row in mesh.vertices]
    lines += [" ".join(str(int(v)) for v in row) for row in mesh.elements]
    for row, lab in zip(mesh.boundary_facets, mesh.boundary_labels):
        lines.append(" ".join(str(int(v)) for v in row) + f" {lab}")
    return "\n".join(lines) + "\n"


def load_mesh(text: str) -> Mesh:
    rows = [ln.split() for ln in text.strip().splitlines()]
    dim, nv, ne = (int(t) for t in rows[0])
    verts = np.array([[float(t) for t in r] for r in rows[1:1 + nv]])
    elems = np.array([[int(t) for t in r] for r in rows[1 + nv:1 + nv + ne]])
    rest = rows[1 + nv + ne:]
    facets = [[int(t) for t in r[:dim]] for r in rest]
    labels = [r[dim] for r in rest]
    return Mesh(verts, elems, facets, labels)
