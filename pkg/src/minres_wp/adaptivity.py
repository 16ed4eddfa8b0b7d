"""Adaptive loop: Kacanov steps, interval widening and mesh refinement.

Each visit computes the indicators of the current iterate (one lookahead
step supplies the iteration indicator) and picks one of four actions. The
lookahead iterate is kept whenever the mesh stays the same.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, fields, replace
from typing import Callable, Optional

import numpy as np

from .assembly import Discretization, ProblemSpec, SigmaField, discretize
from .kacanov import (
    Indicators,
    KacanovState,
    RelaxationInterval,
    compute_indicators,
    initial_state,
    kacanov_step,
    residual_estimate,
)
from .mesh import Mesh, dorfler_mark, refine, refine_uniform
from .spaces import FeFunction, basis
from .problems import eriksson_exact, l2_error, staged_epsilon

__all__ = [
    "AdaptConfig",
    "LoopRecord",
    "ACTIONS",
    "HISTORY_COLUMNS",
    "decide",
    "transfer_sigma",
    "prolong",
    "run_adaptive",
    "History",
]

ACTIONS = ("refine", "widen_up", "widen_down", "iterate")
HISTORY_COLUMNS = ("step", "action", "ndof", "zeta_lo", "zeta_hi", "J_zeta", "eta_zp2",
                   "eta_zm2", "eta_kac2", "eta_h_pprime", "residual", "l2_error", "epsilon")


@dataclass(frozen=True)
class AdaptConfig:
    w: float = 1.0
    theta: float = 0.5
    zeta0: tuple = (1e-2, 1e2)
    zeta_factor: float = 10.0
    max_dofs: int = 10_000
    max_total_iters: int = 500
    inner_iters: int = 1
    mode: str = "adaptive"
    fixed_zeta: Optional[tuple] = None
    p: float = 100.0
    staged: bool = False

    def __post_init__(self):
        if not self.w > 0:
            raise ValueError("w must be positive")
        if not 0.0 < self.theta <= 1.0:
            raise ValueError("theta must lie in (0, 1]")
        if not self.zeta_factor > 1.0:
            raise ValueError("zeta_factor must exceed 1")
        if self.mode not in ("adaptive", "uniform"):
            raise ValueError("mode must be 'adaptive' or 'uniform'")
        if self.inner_iters < 1 or self.max_total_iters < 1 or self.max_dofs < 1:
            raise ValueError("iteration and dof limits must be positive")
        RelaxationInterval(*self.zeta0)
        if self.fixed_zeta is not None:
            RelaxationInterval(*self.fixed_zeta)


@dataclass
class LoopRecord:
    step: int
    action: str
    ndof: int
    zeta_lo: float
    zeta_hi: float
    J_zeta: float
    eta_zp2: float
    eta_zm2: float
    eta_kac2: float
    eta_h_pprime: float
    residual: float
    l2_error: float
    epsilon: float
    status: str = "ok"

    def as_row(self) -> dict:
        return {f.name: getattr(self, f.name) for f in fields(self)}


def decide(ind: Indicators, cfg: AdaptConfig) -> str:
    """Pick the next action from the four indicator totals."""
    zp, zm, kac = ind.eta_zeta_plus_sq, ind.eta_zeta_minus_sq, ind.eta_kac_sq
    values = (zp, zm, kac, ind.eta_h_pprime_total)
    if not all(math.isfinite(v) for v in values):
        raise ValueError("indicators must be finite")
    if zp + zm + kac <= cfg.w * ind.eta_h_pprime_total:
        return "refine"
    if max(zm, kac) <= zp:
        return "widen_up"
    if max(zp, kac) <= zm:
        return "widen_down"
    return "iterate"


def _parent_barycentric(old: Mesh, new: Mesh, points: np.ndarray) -> np.ndarray:
    """Barycentric coordinates of ``points[e, k]`` in the parent of new element ``e``."""
    par = new.parent
    v = old.vertices[old.elements[par]]               # (ne, dim+1, dim)
    jac = np.transpose(v[:, 1:, :] - v[:, :1, :], (0, 2, 1))
    rhs = np.transpose(points - v[:, :1, :], (0, 2, 1))  # (ne, dim, k)
    xi = np.transpose(np.linalg.solve(jac, rhs), (0, 2, 1))
    return np.concatenate([1.0 - xi.sum(axis=2, keepdims=True), xi], axis=2)


def prolong(f: FeFunction, new_space) -> FeFunction:
    """Exact prolongation of a Lagrange function onto a refined mesh."""
    old_space = f.space
    old, new = old_space.mesh, new_space.mesh
    if new.parent is None or new.parent.shape[0] != new.n_elements:
        raise ValueError("new mesh carries no parent links")
    if np.any(new.parent < 0) or np.any(new.parent >= old.n_elements):
        raise ValueError("parent links do not refer to the old mesh")
    if new_space.degree < old_space.degree:
        raise ValueError("prolongation needs a target space of at least the same degree")
    pts = new_space.dof_coords[new_space.element_dofs]  # (ne, nloc, dim)
    lam = _parent_barycentric(old, new, pts)
    ne, nloc, nb = lam.shape
    phi, _ = basis(old.dim, old_space.degree, lam.reshape(-1, nb))
    phi = phi.reshape(ne, nloc, -1)
    coeff = f.coefficients[old_space.element_dofs[new.parent]]
    vals = np.einsum("ekl,el->ek", phi, coeff)
    out = np.zeros(new_space.ndof)
    out[new_space.element_dofs.reshape(-1)] = vals.reshape(-1)
    return FeFunction(new_space, out)


def transfer_sigma(state: KacanovState, disc: Discretization) -> SigmaField:
    """Sigma on the refined mesh of ``disc`` from the parent weights and prolonged psi."""
    if state.psi is None or state.weight is None:
        raise ValueError("state has no solution to transfer")
    psi_new = prolong(state.psi, disc.V)
    old_dx = state.sigma.dx
    wbar = state.weight.element_means(old_dx)[disc.mesh.parent]
    grad = disc.gradients(psi_new)
    data = disc.data
    return SigmaField(wbar[:, None, None] * grad, data.dx, data.rule)


def _reset_history(state: KacanovState) -> KacanovState:
    return replace(state, energies=[state.energy])


class History(list):
    """Records of one adaptive run; ``state`` is the last Kacanov state."""

    state: Optional[KacanovState] = None


def run_adaptive(problem: ProblemSpec, cfg: AdaptConfig, mesh: Mesh,
                 on_record: Optional[Callable[[LoopRecord], None]] = None) -> History:
    """Run the adaptive loop from ``mesh``; returns the list of records.

    With ``cfg.fixed_zeta`` the interval is frozen and every mesh gets exactly
    ``cfg.inner_iters`` Kacanov steps before it is refined. Otherwise the
    four-way controller of :func:`decide` drives the loop. The loop stops
    when the next mesh would exceed ``cfg.max_dofs`` trial dofs (that refine
    decision is recorded with action ``stop``) or after
    ``cfg.max_total_iters`` Kacanov steps.
    """
    records = History()
    zeta = RelaxationInterval(*(cfg.fixed_zeta or cfg.zeta0))

    def problem_for(m: Mesh) -> ProblemSpec:
        if not cfg.staged:
            return problem
        eps = staged_epsilon(m.n_vertices)
        return replace(problem, epsilon=eps, exact=eriksson_exact(eps))

    def setup(m: Mesh, sigma_from: Optional[KacanovState]) -> KacanovState:
        disc = discretize(m, problem_for(m))
        sigma0 = None if sigma_from is None else transfer_sigma(sigma_from, disc)
        return kacanov_step(initial_state(disc, zeta, cfg.p, sigma0))

    def record(state: KacanovState, ind: Indicators, action: str) -> LoopRecord:
        prob = state.disc.problem
        err = l2_error(state.u, prob.exact) if prob.exact is not None else math.nan
        rec = LoopRecord(len(records), action, state.disc.U.ndof, state.zeta.lo, state.zeta.hi,
                         state.energy, ind.eta_zeta_plus_sq, ind.eta_zeta_minus_sq,
                         ind.eta_kac_sq, ind.eta_h_pprime_total, residual_estimate(state),
                         err, prob.epsilon)
        records.append(rec)
        if on_record is not None:
            on_record(rec)
        return rec

    def next_mesh(state: KacanovState) -> Mesh:
        m = state.disc.mesh
        if cfg.mode == "uniform":
            return refine_uniform(m)
        ind = compute_indicators(state, state.energy, state.energy)
        return refine(m, dorfler_mark(ind.eta_h_per_element, cfg.theta))

    state = setup(mesh, None)
    total = 1
    while True:
        if cfg.fixed_zeta is not None:
            steps = 1
            while steps < cfg.inner_iters and total < cfg.max_total_iters:
                state = kacanov_step(state)
                steps += 1
                total += 1
            J_prev = state.energies[-2] if len(state.energies) >= 2 else state.energies[-1]
            ind = compute_indicators(state, J_prev, state.energies[-1])
            action, lookahead = "refine", None
        else:
            lookahead = kacanov_step(state)
            total += 1
            ind = compute_indicators(state, state.energy, lookahead.energies[-1])
            action = decide(ind, cfg)

        if action == "refine":
            src = lookahead if lookahead is not None else state
            new_mesh = next_mesh(src)
            if new_mesh.n_vertices > cfg.max_dofs or total >= cfg.max_total_iters:
                record(state, ind, "stop")
                break
            record(state, ind, action)
            state = setup(new_mesh, src)
            total += 1
            continue

        record(state, ind, action)
        if total >= cfg.max_total_iters:
            break
        if action == "widen_up":
            zeta = zeta.widen_up(cfg.zeta_factor)
            state = _reset_history(replace(lookahead, zeta=zeta))
        elif action == "widen_down":
            zeta = zeta.widen_down(cfg.zeta_factor)
            state = _reset_history(replace(lookahead, zeta=zeta))
        else:
            state = lookahead
            for _ in range(cfg.inner_iters - 1):
                if total >= cfg.max_total_iters:
                    break
                state = kacanov_step(state)
                total += 1
    records.state = state
    return records
