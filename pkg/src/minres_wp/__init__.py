"""Minimal residual finite elements in W^{-1,p} with a relaxed Kacanov solver."""
from .mesh import Mesh, generate_unit_interval, generate_unit_square, refine, refine_uniform, dorfler_mark
from .assembly import ProblemSpec, discretize
from .kacanov import RelaxationInterval, run_kacanov, kacanov_step, compute_indicators
from .adaptivity import AdaptConfig, decide, run_adaptive
from .problems import ExperimentId, make_problem, galerkin_solve, minres_l2_solve, l2_error

__version__ = "0.1.0"

__all__ = [
    "Mesh", "generate_unit_interval", "generate_unit_square", "refine", "refine_uniform",
    "dorfler_mark", "ProblemSpec", "discretize", "RelaxationInterval", "run_kacanov",
    "kacanov_step", "compute_indicators", "AdaptConfig", "decide", "run_adaptive",
    "ExperimentId", "make_problem", "galerkin_solve", "minres_l2_solve", "l2_error",
]
