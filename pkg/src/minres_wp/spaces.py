"""Continuous Lagrange spaces of degree 1 and 2 on simplicial meshes.

Local dof order: vertices first, then (P2 only) edge midpoints in 2D with
edge ``i`` opposite vertex ``i``, or the element midpoint in 1D. Global
numbering puts all vertex dofs first, so a P1 coefficient vector indexes
mesh vertices directly.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence, Union

import numpy as np

from .mesh import Mesh
from .quadrature import QuadRule, quad_rule

__all__ = [
    "FeSpace",
    "FeFunction",
    "ElementData",
    "build_space",
    "interpolate",
    "eval_function",
    "evaluate_on_elements",
    "basis",
    "element_data",
    "as_field",
    "DEFAULT_QUAD_DEGREE",
]

#: exactness degree of the rule shared by every nonlinear-weight integral
DEFAULT_QUAD_DEGREE = 4

Field = Union[float, Callable[[np.ndarray], np.ndarray]]


def as_field(g: Field) -> Callable[[np.ndarray], np.ndarray]:
    """Wrap constants so every coefficient is a vectorised ``x -> values`` map."""
    if callable(g):
        return g
    value = float(g)
    return lambda x: np.full(np.asarray(x).shape[0], value)


def basis(dim: int, degree: int, bary: np.ndarray):
    """Reference basis values and barycentric derivatives.

    Returns ``(phi, dphi)`` with shapes ``(nq, nloc)`` and
    ``(nq, nloc, dim+1)``.
    """
    lam = np.atleast_2d(np.asarray(bary, dtype=float))
    nq = lam.shape[0]
    nb = dim + 1
    if degree == 1:
        return lam.copy(), np.broadcast_to(np.eye(nb), (nq, nb, nb)).copy()
    if degree != 2:
        raise ValueError("only degrees 1 and 2 are supported")
    if dim == 1:
        pairs = [(0, 1)]
    else:
        pairs = [(1, 2), (2, 0), (0, 1)]
    nloc = nb + len(pairs)
    phi = np.empty((nq, nloc))
    dphi = np.zeros((nq, nloc, nb))
    for i in range(nb):
        phi[:, i] = lam[:, i] * (2.0 * lam[:, i] - 1.0)
        dphi[:, i, i] = 4.0 * lam[:, i] - 1.0
    for k, (i, j) in enumerate(pairs):
        phi[:, nb + k] = 4.0 * lam[:, i] * lam[:, j]
        dphi[:, nb + k, i] = 4.0 * lam[:, j]
        dphi[:, nb + k, j] = 4.0 * lam[:, i]
    return phi, dphi


def _bary_gradients(mesh: Mesh) -> np.ndarray:
    """(ne, dim+1, dim) gradients of the barycentric coordinates."""
    x = mesh.vertices[mesh.elements]
    jac = np.transpose(x[:, 1:, :] - x[:, :1, :], (0, 2, 1))  # columns x_i - x_0
    inv = np.linalg.inv(jac)
    grads = np.empty((mesh.n_elements, mesh.dim + 1, mesh.dim))
    grads[:, 1:, :] = inv
    grads[:, 0, :] = -inv.sum(axis=1)
    return grads


@dataclass(frozen=True, eq=False)
class ElementData:
    """Basis data of a space at the points of one quadrature rule."""

    rule: QuadRule
    points: np.ndarray  # (ne, nq, dim) physical points
    dx: np.ndarray      # (ne, nq) |det J| * weight
    phi: np.ndarray     # (nq, nloc)
    grad: np.ndarray    # (ne, nq, nloc, dim)


@dataclass(frozen=True, eq=False)
class FeSpace:
    mesh: Mesh
    degree: int
    dof_coords: np.ndarray
    element_dofs: np.ndarray
    constrained_dofs: np.ndarray
    constrained_values: np.ndarray
    dirichlet_labels: tuple[str, ...] = ()
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def ndof(self) -> int:
        return self.dof_coords.shape[0]

    @property
    def free_dofs(self) -> np.ndarray:
        mask = np.ones(self.ndof, dtype=bool)
        mask[self.constrained_dofs] = False
        return np.flatnonzero(mask)

    @property
    def n_local(self) -> int:
        return self.element_dofs.shape[1]

    def element_data(self, degree: int = DEFAULT_QUAD_DEGREE) -> ElementData:
        key = ("quad", degree)
        if key not in self._cache:
            self._cache[key] = element_data(self, quad_rule(self.mesh.dim, degree))
        return self._cache[key]

    def lift(self) -> "FeFunction":
        """Function carrying the Dirichlet values, zero on free dofs."""
        c = np.zeros(self.ndof)
        c[self.constrained_dofs] = self.constrained_values
        return FeFunction(self, c)


@dataclass(eq=False)
class FeFunction:
    space: FeSpace
    coefficients: np.ndarray

    def __post_init__(self):
        self.coefficients = np.asarray(self.coefficients, dtype=float)
        if self.coefficients.shape != (self.space.ndof,):
            raise ValueError(
                f"expected {self.space.ndof} coefficients, got {self.coefficients.shape}")


def element_data(space: FeSpace, rule: QuadRule) -> ElementData:
    mesh = space.mesh
    phi, dphi = basis(mesh.dim, space.degree, rule.points)
    gl = _bary_gradients(mesh)
    grad = np.einsum("qai,eid->eqad", dphi, gl)
    x = mesh.vertices[mesh.elements]
    points = np.einsum("qi,eid->eqd", rule.points, x)
    vol = np.abs(mesh.volumes)
    # reference measure is 1 (interval) or 1/2 (triangle)
    ref = 1.0 if mesh.dim == 1 else 0.5
    dx = (vol / ref)[:, None] * rule.weights[None, :]
    return ElementData(rule, points, dx, phi, grad)


def build_space(mesh: Mesh, degree: int, dirichlet: Sequence[tuple[str, Field]] = ()) -> FeSpace:
    """Lagrange space of the given degree with Dirichlet values on listed parts."""
    if degree not in (1, 2):
        raise ValueError("degree must be 1 or 2")
    known = set(mesh.boundary_labels.tolist())
    for label, _ in dirichlet:
        if label not in known:
            raise ValueError(f"unknown boundary part {label!r}; mesh has {sorted(known)}")

    nv = mesh.n_vertices
    if degree == 1:
        coords = mesh.vertices.copy()
        edofs = mesh.elements.copy()
    elif mesh.dim == 1:
        ne = mesh.n_elements
        coords = np.vstack([mesh.vertices, mesh.vertices[mesh.elements].mean(axis=1)])
        edofs = np.column_stack([mesh.elements, nv + np.arange(ne)])
    else:
        edges = mesh.edges
        coords = np.vstack([mesh.vertices, mesh.vertices[edges].mean(axis=1)])
        edofs = np.column_stack([mesh.elements, nv + mesh.element_edges])

    ids, vals = [], []
    seen: set[int] = set()
    for label, g in dirichlet:
        g = as_field(g)
        sel = mesh.boundary_labels == label
        facets = mesh.boundary_facets[sel]
        part = list(facets.reshape(-1))
        if degree == 2 and mesh.dim == 2 and facets.size:
            key = {tuple(e): k for k, e in enumerate(mesh.edges.tolist())}
            part += [nv + key[tuple(sorted(f))] for f in facets.tolist()]
        new = [d for d in dict.fromkeys(int(d) for d in part) if d not in seen]
        if not new:
            continue
        seen.update(new)
        ids += new
        vals += list(np.asarray(g(coords[new]), dtype=float).reshape(-1))
    order = np.argsort(ids, kind="stable")
    cids = np.asarray(ids, dtype=np.int64)[order]
    cvals = np.asarray(vals, dtype=float)[order]
    for a in (coords, edofs, cids, cvals):
        a.setflags(write=False)
    return FeSpace(mesh, degree, coords, edofs, cids, cvals,
                   tuple(label for label, _ in dirichlet))


def interpolate(g: Field, space: FeSpace) -> FeFunction:
    """Nodal interpolant: coefficients are ``g`` at the dof coordinates."""
    vals = np.asarray(as_field(g)(space.dof_coords), dtype=float).reshape(-1)
    if not np.all(np.isfinite(vals)):
        raise ValueError("interpolated function is not finite at every dof")
    return FeFunction(space, vals)


def eval_function(f: FeFunction, element: int, ref_point) -> tuple[float, np.ndarray]:
    """Value and physical gradient at a reference point of one element.

    ``ref_point`` holds the ``dim`` reference coordinates; vertex ``i > 0``
    of the element sits at the ``i``-th unit vector.
    """
    space = f.space
    xi = np.asarray(ref_point, dtype=float).reshape(-1)
    bary = np.concatenate([[1.0 - xi.sum()], xi])[None, :]
    phi, dphi = basis(space.mesh.dim, space.degree, bary)
    gl = _bary_gradients_one(space.mesh, element)
    c = f.coefficients[space.element_dofs[element]]
    value = float(phi[0] @ c)
    grad = np.einsum("ai,id->ad", dphi[0], gl).T @ c
    return value, grad


def _bary_gradients_one(mesh: Mesh, element: int) -> np.ndarray:
    x = mesh.vertices[mesh.elements[element]]
    inv = np.linalg.inv((x[1:] - x[0]).T)
    return np.vstack([-inv.sum(axis=0), inv])


def evaluate_on_elements(f: FeFunction, data: ElementData):
    """Values ``(ne, nq)`` and gradients ``(ne, nq, dim)`` at quadrature points."""
    c = f.coefficients[f.space.element_dofs]
    vals = c @ data.phi.T
    grads = np.einsum("eqad,ea->eqd", data.grad, c)
    return vals, grads
