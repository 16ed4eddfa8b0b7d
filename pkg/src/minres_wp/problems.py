"""Benchmark problems, exact solutions, baseline solvers and error metrics."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .assembly import (
    ProblemSpec,
    assemble_b,
    assemble_load,
    discretize_spaces,
)
from .linsolve import SaddleSystem, SingularSystemError, lu_solve, solve_saddle
from .mesh import Mesh, generate_unit_interval, generate_unit_square
from .spaces import (
    DEFAULT_QUAD_DEGREE,
    FeFunction,
    FeSpace,
    _bary_gradients,
    as_field,
    basis,
    evaluate_on_elements,
)

__all__ = [
    "ExperimentId",
    "BaselineResult",
    "make_problem",
    "initial_mesh",
    "eriksson_exponents",
    "eriksson_exact",
    "galerkin_solve",
    "minres_l2_solve",
    "l2_error",
    "line_profile",
    "locate",
    "staged_epsilon",
    "STAGED_THRESHOLDS",
]

EXPERIMENTS = ("exp1", "exp2", "eriksson")


@dataclass(frozen=True)
class ExperimentId:
    name: str
    epsilon: Optional[float] = None

    def __post_init__(self):
        if self.name not in EXPERIMENTS:
            raise ValueError(f"unknown experiment {self.name!r}")
        if self.name == "eriksson":
            if self.epsilon is None or not self.epsilon > 0:
                raise ValueError("eriksson needs a positive epsilon")
        elif self.epsilon is not None:
            raise ValueError(f"{self.name} has no diffusion parameter")

    @property
    def dim(self) -> int:
        return 1 if self.name == "exp1" else 2


def _viscosity_exact(x: np.ndarray) -> np.ndarray:
    return 1.0 - np.exp(-np.asarray(x)[:, 0])


def eriksson_exponents(eps: float) -> tuple[float, float]:
    """Roots ``s_1 > 0 > s_2`` of ``eps s^2 - s - eps pi^2 = 0``."""
    root = np.sqrt(1.0 + 4.0 * np.pi ** 2 * eps ** 2)
    s1 = (1.0 + root) / (2.0 * eps)
    # s1 s2 = -pi^2; avoids the cancellation in (1 - root)
    return float(s1), float(-np.pi ** 2 / s1)


def eriksson_exact(eps: float) -> Callable[[np.ndarray], np.ndarray]:
    s1, s2 = eriksson_exponents(eps)
    denom = np.exp(-s1) - np.exp(-s2)

    def u(x):
        x = np.asarray(x, dtype=float)
        t = x[:, 0] - 1.0
        return (np.exp(s1 * t) - np.exp(s2 * t)) / denom * np.sin(np.pi * x[:, 1])

    return u


def make_problem(exp: ExperimentId) -> ProblemSpec:
    if exp.name == "exp1":
        return ProblemSpec(1, 0.0, (1.0,), 1.0, 1.0, (("left", 0.0), ("right", 0.0)),
                           exact=_viscosity_exact, name="exp1")
    if exp.name == "exp2":
        return ProblemSpec(2, 0.0, (1.0, 0.0), 1.0, 1.0, (("left", 0.0), ("right", 0.0)),
                           exact=_viscosity_exact, name="exp2")
    inflow = lambda x: np.sin(np.pi * np.asarray(x)[:, 1])  # noqa: E731
    parts = (("left", inflow), ("right", 0.0), ("bottom", 0.0), ("top", 0.0))
    return ProblemSpec(2, float(exp.epsilon), (1.0, 0.0), 0.0, 0.0, parts,
                       exact=eriksson_exact(exp.epsilon), name="eriksson")


def initial_mesh(exp: ExperimentId, n: int) -> Mesh:
    return generate_unit_interval(n) if exp.dim == 1 else generate_unit_square(n)


STAGED_THRESHOLDS = ((1000, 1e-2), (5000, 1e-3), (10000, 1e-4), (50000, 1e-5))


def staged_epsilon(ndof: int) -> float:
    """Diffusion schedule for continuation in the number of trial dofs."""
    if ndof < 0:
        raise ValueError("ndof must be nonnegative")
    for bound, eps in STAGED_THRESHOLDS:
        if ndof < bound:
            return eps
    return 1e-6


@dataclass(eq=False)
class BaselineResult:
    method: str
    u: Optional[FeFunction]
    indicators: Optional[np.ndarray]
    status: str = "ok"
    message: str = ""
    psi: Optional[FeFunction] = None


def _element_l2_sq(values: np.ndarray, dx: np.ndarray) -> np.ndarray:
    return np.sum(dx * values ** 2, axis=1)


def _facet_jumps(U: FeSpace, prob: ProblemSpec, u: FeFunction) -> np.ndarray:
    """Per-element share of ``h_F ||[eps grad u . n]||^2_F`` over interior facets."""
    mesh = U.mesh
    out = np.zeros(mesh.n_elements)
    if prob.epsilon == 0.0:
        return out
    gl = _bary_gradients(mesh)
    # P1 gradient is elementwise constant; P2 would need facet quadrature
    if U.degree != 1:
        raise NotImplementedError("facet jumps are implemented for P1 only")
    grad = np.einsum("eid,ei->ed", gl, u.coefficients[U.element_dofs])
    nb = mesh.neighbors
    h = mesh.diameters
    for e in range(mesh.n_elements):
        for loc in range(mesh.dim + 1):
            o = nb[e, loc]
            if o < 0 or o < e:
                continue
            # outward normal of e across the facet opposite vertex loc
            n = -gl[e, loc] / np.linalg.norm(gl[e, loc])
            jump = prob.epsilon * float((grad[e] - grad[o]) @ n)
            if mesh.dim == 1:
                hF, size = 0.5 * (h[e] + h[o]), 1.0
            else:
                a, b = (mesh.elements[e, k] for k in range(3) if k != loc)
                size = float(np.linalg.norm(mesh.vertices[a] - mesh.vertices[b]))
                hF = size
            contrib = hF * jump ** 2 * size
            out[e] += 0.5 * contrib
            out[o] += 0.5 * contrib
    return out


def galerkin_solve(prob: ProblemSpec, U: FeSpace,
                   quad_degree: int = DEFAULT_QUAD_DEGREE) -> BaselineResult:
    """Standard Galerkin method with a residual error estimator."""
    Bmat = assemble_b(U, U, prob, quad_degree)
    lift = U.lift()
    F = assemble_load(U, prob, lift, Bmat=Bmat, quad_degree=quad_degree)
    free = U.free_dofs
    try:
        x = lu_solve(Bmat[free][:, free].tocsc(), F[free])
    except SingularSystemError as exc:
        return BaselineResult("galerkin", None, None, "solver_failure", str(exc))
    c = lift.coefficients.copy()
    c[free] = x
    u = FeFunction(U, c)
    data = U.element_data(quad_degree)
    vals, grads = evaluate_on_elements(u, data)
    f = as_field(prob.f)(data.points.reshape(-1, U.mesh.dim)).reshape(data.dx.shape)
    # eps * Laplacian vanishes for P1
    res = f - grads @ np.asarray(prob.beta) - prob.c * vals
    h = U.mesh.diameters
    eta = h ** 2 * _element_l2_sq(res, data.dx) + _facet_jumps(U, prob, u)
    return BaselineResult("galerkin", u, eta)


def minres_l2_solve(prob: ProblemSpec, U: FeSpace, V: FeSpace,
                    quad_degree: int = DEFAULT_QUAD_DEGREE) -> BaselineResult:
    """Minimal residual method in the discrete H^{-1} norm (unit weight)."""
    disc = discretize_spaces(prob, U, V, quad_degree)
    A = disc.stiffness(1.0)
    try:
        psi_free, u_free = solve_saddle(SaddleSystem(A, disc.B, disc.F))
    except SingularSystemError as exc:
        return BaselineResult("minres_l2", None, None, "solver_failure", str(exc))
    psi = disc.expand_psi(psi_free)
    u = disc.expand_u(u_free)
    grads = disc.gradients(psi)
    eta = np.sum(disc.data.dx * np.sum(grads ** 2, axis=-1), axis=1)
    return BaselineResult("minres_l2", u, eta, psi=psi)


def l2_error(u: FeFunction, exact, quad_degree: int = DEFAULT_QUAD_DEGREE) -> float:
    """``||u - exact||_{L^2}`` by elementwise quadrature."""
    data = u.space.element_data(quad_degree)
    vals, _ = evaluate_on_elements(u, data)
    ref = as_field(exact)(data.points.reshape(-1, u.space.mesh.dim)).reshape(data.dx.shape)
    return float(np.sqrt(np.sum(data.dx * (vals - ref) ** 2)))


def _barycentric(mesh: Mesh, e: int, x: np.ndarray) -> np.ndarray:
    v = mesh.vertices[mesh.elements[e]]
    xi = np.linalg.solve((v[1:] - v[0]).T, x - v[0])
    return np.concatenate([[1.0 - xi.sum()], xi])


def locate(mesh: Mesh, x, start: int = 0, tol: float = 1e-12) -> tuple[int, np.ndarray]:
    """Element containing ``x`` and its barycentric coordinates.

    Walks across the facet with the most negative barycentric coordinate,
    falling back to a full scan if the walk leaves the mesh or cycles.
    """
    x = np.asarray(x, dtype=float).reshape(-1)
    e = start
    nb = mesh.neighbors
    for _ in range(mesh.n_elements + 1):
        lam = _barycentric(mesh, e, x)
        k = int(np.argmin(lam))
        if lam[k] >= -tol:
            return e, lam
        if nb[e, k] < 0:
            break
        e = int(nb[e, k])
    for e in range(mesh.n_elements):
        lam = _barycentric(mesh, e, x)
        if lam.min() >= -tol:
            return e, lam
    raise ValueError(f"point {x} lies outside the mesh")


def line_profile(u: FeFunction, axis: str = "x", value: float = 0.5,
                 samples: int = 101) -> np.ndarray:
    """``(samples, 2)`` array of (coordinate, u) along a line of the unit square.

    ``axis`` names the varying coordinate; ``value`` fixes the other one (unused
    in 1D).
    """
    if samples < 2:
        raise ValueError("need at least two samples")
    if not 0.0 <= value <= 1.0:
        raise ValueError("line must cross the unit domain")
    space = u.space
    mesh = space.mesh
    t = np.linspace(0.0, 1.0, samples)
    out = np.empty((samples, 2))
    out[:, 0] = t
    e = 0
    for i, s in enumerate(t):
        if mesh.dim == 1:
            x = np.array([s])
        elif axis == "x":
            x = np.array([s, value])
        elif axis == "y":
            x = np.array([value, s])
        else:
            raise ValueError("axis must be 'x' or 'y'")
        e, lam = locate(mesh, x, start=e)
        phi, _ = basis(mesh.dim, space.degree, lam[None, :])
        out[i, 1] = float(phi[0] @ u.coefficients[space.element_dofs[e]])
    return out
