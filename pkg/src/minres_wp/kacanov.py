"""Relaxed Kacanov iteration for the W^{-1,p} minimal residual problem.

Each step freezes the weight ``clamp(|sigma_n|)^(2-p')``, solves the weighted
saddle system for ``(psi_{n+1}, u_{n+1})`` and updates the dual variable to
``sigma_{n+1} = weight * grad psi_{n+1}`` at the quadrature points. The
relaxed dual energy of the iterates is non-increasing once the first step has
moved sigma into the discrete constraint set.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np

from .assembly import (
    Discretization,
    SigmaField,
    WeightField,
    energy_J,
    energy_Jzeta,
    local_pprime_norms,
)
from .linsolve import SaddleSystem, solve_saddle
from .spaces import FeFunction, FeSpace

__all__ = [
    "RelaxationInterval",
    "KacanovState",
    "Indicators",
    "conjugate_exponent",
    "clamp",
    "weight_from_sigma",
    "initial_sigma",
    "initial_state",
    "kacanov_step",
    "compute_indicators",
    "residual_estimate",
    "psi_residual_norm",
    "duality_gap",
    "zeta_bound",
    "run_kacanov",
    "TRACE_COLUMNS",
]

TRACE_COLUMNS = ("n", "J_zeta", "eta_zp2", "eta_zm2", "eta_kac2", "eta_h_pprime",
                 "residual_estimate")

# slack for round-off in energy differences, relative to the energy scale
_NEG_TOL = 1e-12


@dataclass(frozen=True)
class RelaxationInterval:
    lo: float
    hi: float

    def __post_init__(self):
        lo, hi = float(self.lo), float(self.hi)
        if not (0.0 < lo <= hi < math.inf):
            raise ValueError(f"invalid relaxation interval [{lo}, {hi}]")
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)

    def __iter__(self):
        yield self.lo
        yield self.hi

    @classmethod
    def parse(cls, text: str) -> "RelaxationInterval":
        lo, hi = text.split(":")
        return cls(float(lo), float(hi))

    def widen_up(self, factor: float) -> "RelaxationInterval":
        return RelaxationInterval(self.lo, self.hi * factor)

    def widen_down(self, factor: float) -> "RelaxationInterval":
        return RelaxationInterval(self.lo / factor, self.hi)


def conjugate_exponent(p: float) -> float:
    """``p' = p / (p - 1)``."""
    if p <= 1:
        raise ValueError("p must exceed 1")
    return p / (p - 1.0)


def clamp(t, zeta):
    """``max(lo, min(t, hi))``."""
    lo, hi = zeta
    out = np.clip(np.asarray(t, dtype=float), lo, hi)
    return out if out.ndim else float(out)


def weight_from_sigma(sigma: SigmaField, zeta, pprime: float) -> WeightField:
    if not 1.0 < pprime <= 2.0:
        raise ValueError("p' must lie in (1, 2]")
    return WeightField(clamp(sigma.magnitude, zeta) ** (2.0 - pprime))


def initial_sigma(V: FeSpace, quad_degree: Optional[int] = None) -> SigmaField:
    """The zero field on the quadrature points of ``V``."""
    data = V.element_data() if quad_degree is None else V.element_data(quad_degree)
    ne, nq = data.dx.shape
    return SigmaField(np.zeros((ne, nq, V.mesh.dim)), data.dx, data.rule)


@dataclass(eq=False)
class KacanovState:
    disc: Discretization
    p: float
    pprime: float
    zeta: RelaxationInterval
    sigma: SigmaField
    psi: Optional[FeFunction] = None
    u: Optional[FeFunction] = None
    weight: Optional[WeightField] = None  # weight that produced ``sigma``
    energies: list = field(default_factory=list)
    n: int = 0

    @property
    def energy(self) -> float:
        """Relaxed energy of the current iterate under the current interval."""
        return energy_Jzeta(self.sigma, self.zeta, self.pprime)


def initial_state(disc: Discretization, zeta, p: float,
                  sigma0: Optional[SigmaField] = None) -> KacanovState:
    zeta = zeta if isinstance(zeta, RelaxationInterval) else RelaxationInterval(*zeta)
    sigma = initial_sigma(disc.V, disc.quad_degree) if sigma0 is None else sigma0
    return KacanovState(disc, float(p), conjugate_exponent(p), zeta, sigma)


def kacanov_step(state: KacanovState) -> KacanovState:
    """One clamp-weight-solve-update cycle; returns a new state."""
    disc = state.disc
    w = weight_from_sigma(state.sigma, state.zeta, state.pprime)
    A = disc.stiffness(w)
    psi_free, u_free = solve_saddle(SaddleSystem(A, disc.B, disc.F))
    psi = disc.expand_psi(psi_free)
    u = disc.expand_u(u_free)
    grad = disc.gradients(psi)
    sigma = SigmaField(w.values[..., None] * grad, state.sigma.dx, state.sigma.rule)
    J = energy_Jzeta(sigma, state.zeta, state.pprime)
    return replace(state, sigma=sigma, psi=psi, u=u, weight=w,
                   energies=state.energies + [J], n=state.n + 1)


@dataclass(frozen=True)
class Indicators:
    eta_zeta_plus_sq: float
    eta_zeta_minus_sq: float
    eta_kac_sq: float
    eta_h_pprime_total: float
    eta_h_per_element: np.ndarray = field(repr=False)

    def as_row(self) -> dict:
        return {
            "eta_zp2": self.eta_zeta_plus_sq,
            "eta_zm2": self.eta_zeta_minus_sq,
            "eta_kac2": self.eta_kac_sq,
            "eta_h_pprime": self.eta_h_pprime_total,
        }


def _nonnegative(value: float, scale: float, name: str) -> float:
    if value < -_NEG_TOL * max(1.0, abs(scale)):
        raise ValueError(f"indicator {name} is negative ({value:.3e}); energy evaluation is inconsistent")
    return max(value, 0.0)


def compute_indicators(state: KacanovState, J_prev: float, J_next: float) -> Indicators:
    """Interval, iteration and discretisation indicators of ``state.sigma``.

    ``J_prev`` is the relaxed energy of ``state.sigma`` and ``J_next`` that
    of the following Kacanov iterate under the same interval.
    """
    sigma, q = state.sigma, state.pprime
    lo, hi = state.zeta
    J = energy_Jzeta(sigma, state.zeta, q)
    eta_plus = _nonnegative(J - energy_Jzeta(sigma, (lo, math.inf), q), J, "eta_zeta_plus")
    eta_minus = _nonnegative(J - energy_Jzeta(sigma, (0.0, hi), q), J, "eta_zeta_minus")
    drop = _nonnegative(J_prev - J_next, J_prev, "eta_kac")
    eta_kac = (hi / lo) ** (2.0 - q) * drop
    local = local_pprime_norms(sigma, q)
    return Indicators(eta_plus, eta_minus, eta_kac, float(local.sum()), local)


def residual_estimate(state: KacanovState) -> float:
    """``||sigma||_{L^p'}``, the discrete dual norm of the residual at the fixed point."""
    return float(np.sum(local_pprime_norms(state.sigma, state.pprime))) ** (1.0 / state.pprime)


def _lp_norm(values: np.ndarray, dx: np.ndarray, p: float) -> float:
    top = float(np.max(values)) if values.size else 0.0
    if top == 0.0:
        return 0.0
    return top * float(np.sum(dx * (values / top) ** p)) ** (1.0 / p)


def psi_residual_norm(state: KacanovState) -> float:
    """``||grad psi||_{L^p}^(p-1)`` evaluated by quadrature."""
    grad = state.disc.gradients(state.psi)
    return _lp_norm(np.linalg.norm(grad, axis=-1), state.sigma.dx, state.p) ** (state.p - 1.0)


def duality_gap(state: KacanovState) -> float:
    """``(1/p) int |grad psi|^p - F(psi) + (1/p') int |sigma|^p'``; zero at an unclamped fixed point."""
    disc = state.disc
    grad = np.linalg.norm(disc.gradients(state.psi), axis=-1)
    primal = _lp_norm(grad, state.sigma.dx, state.p) ** state.p / state.p
    load = float(disc.F_full @ state.psi.coefficients)
    return primal - load + energy_J(state.sigma, state.pprime)


def zeta_bound(state: KacanovState, r: Optional[float] = None) -> float:
    """Right-hand side of the interval-convergence bound, using the current sigma.

    Diagnostic only: the bound involves the exact dual solution, replaced here
    by the iterate, with ``r = 2 p'`` unless given.
    """
    q = state.pprime
    r = 2.0 * q if r is None else r
    lo, hi = state.zeta
    area = float(state.sigma.dx.sum())
    sig_r = float(np.sum(state.sigma.dx * state.sigma.magnitude ** r))
    return area / q * lo ** q + hi ** (-(r - q)) / q * sig_r


def run_kacanov(disc: Discretization, zeta, p: float, max_iters: int = 50,
                rel_tol: float = 1e-10, sigma0: Optional[SigmaField] = None,
                trace: Optional[list] = None) -> KacanovState:
    """Iterate until the energy decrement drops below ``rel_tol * max(1, |J|)``.

    With ``trace`` given, one dict per iterate (``TRACE_COLUMNS``) is appended;
    the iteration indicator of a row needs the next iterate, so it is
    recorded once that iterate exists and is NaN for the last row.
    """
    if max_iters < 1:
        raise ValueError("max_iters must be >= 1")
    state = initial_state(disc, zeta, p, sigma0)
    prev: Optional[KacanovState] = None
    while state.n < max_iters:
        nxt = kacanov_step(state)
        if trace is not None and prev is not None:
            trace.append(_trace_row(state, state.energies[-1], nxt.energies[-1]))
        prev, state = state, nxt
        if len(state.energies) >= 2:
            drop = state.energies[-2] - state.energies[-1]
            if drop <= rel_tol * max(1.0, abs(state.energies[-1])):
                break
    if trace is not None:
        trace.append(_trace_row(state, state.energies[-1], None))
    return state


def _trace_row(state: KacanovState, J: float, J_next: Optional[float]) -> dict:
    ind = compute_indicators(state, J, J if J_next is None else J_next)
    row = {"n": state.n, "J_zeta": J, **ind.as_row(), "residual_estimate": residual_estimate(state)}
    if J_next is None:
        row["eta_kac2"] = math.nan
    return row
