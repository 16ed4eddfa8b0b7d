"""Element-loop assembly and the relaxed dual energies.

The bilinear form is ``b(u, v) = int eps grad u . grad v - int u beta . grad v
+ int c u v`` with constant ``beta`` and ``c``. Everything nonlinear lives at
the points of one shared quadrature rule (see
:data:`minres_wp.spaces.DEFAULT_QUAD_DEGREE`).
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
import scipy.sparse as sp

from .mesh import Mesh
from .quadrature import QuadRule
from .spaces import (
    DEFAULT_QUAD_DEGREE,
    FeFunction,
    FeSpace,
    Field,
    as_field,
    build_space,
    evaluate_on_elements,
)

__all__ = [
    "ProblemSpec",
    "SigmaField",
    "WeightField",
    "Discretization",
    "assemble_weighted_stiffness",
    "assemble_b",
    "assemble_load",
    "discretize",
    "discretize_spaces",
    "kappa_star",
    "kappa_star_derivative",
    "energy_J",
    "energy_Jzeta",
    "local_pprime_norms",
]


@dataclass(frozen=True)
class ProblemSpec:
    """Coefficients and boundary data of ``-div(eps grad u - beta u) + c u = f``."""

    dim: int
    epsilon: float
    beta: tuple[float, ...]
    c: float
    f: Field
    dirichlet_parts: tuple[tuple[str, Field], ...]
    exact: Optional[Callable[[np.ndarray], np.ndarray]] = None
    name: str = ""

    def __post_init__(self):
        if self.epsilon < 0:
            raise ValueError("diffusion must be nonnegative")
        beta = tuple(float(b) for b in np.atleast_1d(self.beta))
        if len(beta) != self.dim:
            raise ValueError(f"beta must have {self.dim} components")
        object.__setattr__(self, "beta", beta)
        object.__setattr__(self, "dirichlet_parts", tuple(self.dirichlet_parts))


@dataclass(frozen=True, eq=False)
class SigmaField:
    """Vector samples of the dual variable at every quadrature point."""

    values: np.ndarray  # (ne, nq, dim)
    dx: np.ndarray      # (ne, nq) quadrature measure
    rule: Optional[QuadRule] = None

    def __post_init__(self):
        if self.values.shape[:2] != self.dx.shape:
            raise ValueError("sigma samples do not match the quadrature layout")
        if not np.all(np.isfinite(self.values)):
            raise ValueError("sigma has non-finite samples")

    @property
    def magnitude(self) -> np.ndarray:
        return np.linalg.norm(self.values, axis=-1)


@dataclass(frozen=True, eq=False)
class WeightField:
    """Positive scalar weight per element and quadrature point."""

    values: np.ndarray  # (ne, nq)

    def element_means(self, dx: np.ndarray) -> np.ndarray:
        return (self.values * dx).sum(axis=1) / dx.sum(axis=1)


def _coo_pattern(rows_dofs: np.ndarray, cols_dofs: np.ndarray):
    nr, nc = rows_dofs.shape[1], cols_dofs.shape[1]
    rows = np.repeat(rows_dofs[:, :, None], nc, axis=2).reshape(-1)
    cols = np.repeat(cols_dofs[:, None, :], nr, axis=1).reshape(-1)
    return rows, cols


def _to_csr(local: np.ndarray, rows_dofs, cols_dofs, shape) -> sp.csr_matrix:
    rows, cols = _coo_pattern(rows_dofs, cols_dofs)
    mat = sp.coo_matrix((local.reshape(-1), (rows, cols)), shape=shape).tocsr()
    mat.sum_duplicates()
    mat.sort_indices()
    return mat


def assemble_weighted_stiffness(V: FeSpace, w, quad_degree: int = DEFAULT_QUAD_DEGREE) -> sp.csr_matrix:
    """``A_ij = sum_T sum_q dx * w * grad phi_j . grad phi_i`` over all dofs."""
    data = V.element_data(quad_degree)
    wv = w.values if isinstance(w, WeightField) else np.asarray(w, dtype=float)
    wv = np.broadcast_to(wv, data.dx.shape)
    local = np.einsum("eq,eqad,eqbd->eab", data.dx * wv, data.grad, data.grad)
    local = 0.5 * (local + np.transpose(local, (0, 2, 1)))
    return _to_csr(local, V.element_dofs, V.element_dofs, (V.ndof, V.ndof))


def assemble_b(U: FeSpace, V: FeSpace, prob: ProblemSpec,
               quad_degree: int = DEFAULT_QUAD_DEGREE) -> sp.csr_matrix:
    """Rectangular ``Bmat[i, j] = b(phi^U_j, phi^V_i)``."""
    if U.mesh is not V.mesh:
        raise ValueError("U and V must live on the same mesh")
    du = U.element_data(quad_degree)
    dv = V.element_data(quad_degree)
    dx = dv.dx
    beta = np.asarray(prob.beta)
    local = np.zeros((U.mesh.n_elements, V.n_local, U.n_local))
    if prob.epsilon:
        local += prob.epsilon * np.einsum("eq,eqid,eqjd->eij", dx, dv.grad, du.grad)
    if np.any(beta):
        bgrad_v = np.einsum("eqid,d->eqi", dv.grad, beta)
        local -= np.einsum("eq,eqi,qj->eij", dx, bgrad_v, du.phi)
    if prob.c:
        local += prob.c * np.einsum("eq,qi,qj->eij", dx, dv.phi, du.phi)
    return _to_csr(local, V.element_dofs, U.element_dofs, (V.ndof, U.ndof))


def assemble_load(V: FeSpace, prob: ProblemSpec, lift: Optional[FeFunction] = None,
                  Bmat: Optional[sp.spmatrix] = None,
                  quad_degree: int = DEFAULT_QUAD_DEGREE) -> np.ndarray:
    """``F_i = int f phi_i - b(lift, phi_i)``; ``Bmat`` may be passed to skip reassembly."""
    data = V.element_data(quad_degree)
    fvals = as_field(prob.f)(data.points.reshape(-1, V.mesh.dim)).reshape(data.dx.shape)
    local = np.einsum("eq,qi->ei", data.dx * fvals, data.phi)
    F = np.bincount(V.element_dofs.reshape(-1), weights=local.reshape(-1), minlength=V.ndof)
    if lift is not None:
        if lift.space.mesh is not V.mesh:
            raise ValueError("lift must live on the same mesh")
        if Bmat is None:
            Bmat = assemble_b(lift.space, V, prob, quad_degree)
        F = F - Bmat @ lift.coefficients
    return F


@dataclass(eq=False)
class Discretization:
    """Trial/test spaces with the constraint-reduced coupling matrix and load.

    ``B`` and ``F`` are restricted to the free dofs; ``lift`` carries the
    Dirichlet data of the trial space.
    """

    problem: ProblemSpec
    mesh: Mesh
    U: FeSpace
    V: FeSpace
    B_full: sp.csr_matrix
    F_full: np.ndarray
    lift: FeFunction
    quad_degree: int = DEFAULT_QUAD_DEGREE
    _pattern: dict = field(default_factory=dict, repr=False)

    @property
    def freeU(self) -> np.ndarray:
        return self.U.free_dofs

    @property
    def freeV(self) -> np.ndarray:
        return self.V.free_dofs

    @property
    def B(self) -> sp.csr_matrix:
        if "B" not in self._pattern:
            self._pattern["B"] = self.B_full[self.freeV][:, self.freeU].tocsr()
        return self._pattern["B"]

    @property
    def F(self) -> np.ndarray:
        return self.F_full[self.freeV]

    @property
    def data(self):
        return self.V.element_data(self.quad_degree)

    def stiffness(self, w) -> sp.csr_matrix:
        """Weighted V-stiffness restricted to the free test dofs."""
        A = assemble_weighted_stiffness(self.V, w, self.quad_degree)
        free = self.freeV
        return A[free][:, free].tocsr()

    def expand_psi(self, psi_free: np.ndarray) -> FeFunction:
        c = np.zeros(self.V.ndof)
        c[self.freeV] = psi_free
        return FeFunction(self.V, c)

    def expand_u(self, u_free: np.ndarray) -> FeFunction:
        c = self.lift.coefficients.copy()
        c[self.freeU] = u_free
        return FeFunction(self.U, c)

    def gradients(self, psi: FeFunction) -> np.ndarray:
        return evaluate_on_elements(psi, self.data)[1]


def discretize(mesh: Mesh, problem: ProblemSpec, trial_degree: int = 1, test_degree: int = 2,
               quad_degree: int = DEFAULT_QUAD_DEGREE) -> Discretization:
    """Build U_h, V_h (homogeneous on the same Dirichlet parts), lift and lifted load."""
    if mesh.dim != problem.dim:
        raise ValueError("mesh and problem dimensions differ")
    U = build_space(mesh, trial_degree, problem.dirichlet_parts)
    V = build_space(mesh, test_degree, [(label, 0.0) for label, _ in problem.dirichlet_parts])
    return discretize_spaces(problem, U, V, quad_degree)


def discretize_spaces(problem: ProblemSpec, U: FeSpace, V: FeSpace,
                      quad_degree: int = DEFAULT_QUAD_DEGREE) -> Discretization:
    """Same as :func:`discretize` for spaces built by the caller."""
    B_full = assemble_b(U, V, problem, quad_degree)
    lift = U.lift()
    F_full = assemble_load(V, problem, lift, Bmat=B_full, quad_degree=quad_degree)
    return Discretization(problem, U.mesh, U, V, B_full, F_full, lift, quad_degree)


def _bounds(zeta) -> tuple[float, float]:
    lo, hi = zeta
    return float(lo), float(hi)


def kappa_star(t, zeta, pprime: float):
    """Relaxed integrand: quadratic below ``lo``, ``t^p'/p'`` inside, quadratic above ``hi``.

    ``lo = 0`` drops the lower quadratic branch and ``hi = inf`` the upper one.
    """
    lo, hi = _bounds(zeta)
    t = np.asarray(t, dtype=float)
    q = pprime
    out = t ** q / q
    if lo > 0.0:
        low = t < lo
        out = np.where(low, 0.5 * lo ** (q - 2.0) * t * t + (1.0 / q - 0.5) * lo ** q, out)
    if np.isfinite(hi):
        high = t > hi
        out = np.where(high, 0.5 * hi ** (q - 2.0) * t * t + (1.0 / q - 0.5) * hi ** q, out)
    return out if out.ndim else float(out)


def kappa_star_derivative(t, zeta, pprime: float):
    """``d kappa*/dt = clamp(t)^(p'-2) t``."""
    lo, hi = _bounds(zeta)
    t = np.asarray(t, dtype=float)
    s = np.clip(t, lo, hi)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = np.where(s > 0, s ** (pprime - 2.0) * t, 0.0)
    return out if out.ndim else float(out)


def energy_Jzeta(sigma: SigmaField, zeta, pprime: float) -> float:
    """``int kappa*_zeta(|sigma|) dx`` by quadrature."""
    return float(np.sum(sigma.dx * kappa_star(sigma.magnitude, zeta, pprime)))


def energy_J(sigma: SigmaField, pprime: float) -> float:
    """``(1/p') int |sigma|^p' dx`` by quadrature."""
    return float(np.sum(sigma.dx * sigma.magnitude ** pprime) / pprime)


def local_pprime_norms(sigma: SigmaField, pprime: float) -> np.ndarray:
    """Per-element ``||sigma||_{L^p'(T)}^p'``."""
    return np.sum(sigma.dx * sigma.magnitude ** pprime, axis=1)

