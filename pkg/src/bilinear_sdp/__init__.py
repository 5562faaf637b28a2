"""Optimal state transfer in dissipative bilinear control systems via semidefinite programming.

Typical flow: build a :class:`ProblemSpec`, solve the transfer program with
:func:`solve`, reduce the optimum with :func:`rank_reduce`, turn it into
feedback controls with :func:`schedule_from_solution` and integrate with
:func:`simulate_r` or :func:`closed_loop_xy`.
"""

__version__ = "0.1.0"

from .exceptions import (
    BilinearSDPError,
    FactorizationError,
    InvalidInputError,
    NumericFailure,
    SingularControlError,
)
from .linalg import spectral_decompose, trace_inner
from .lowrank import conjecture_probe, numerical_rank, rank_bound, rank_reduce
from .oracles import analytic_2x2, analytic_3chain, analytic_reachable_2x2
from .problem import ProblemSpec, chain, load_problem, random_spec, validate
from .reachable import reach_set, reach_slice
from .sdp import SdpProblem, SolverConfig, Status, certify, solve
from .simulate import IntegratorConfig, closed_loop_xy, rescaled_time, simulate_p, simulate_r, simulate_xy
from .synthesis import (
    ControlSchedule,
    FeedbackLaw,
    choose_repetitions,
    epsilon_kick,
    feedback_controls,
    physical_controls,
    schedule_from_solution,
)
from .estimator import OptimalTransfer

__all__ = [
    "BilinearSDPError",
    "ControlSchedule",
    "FactorizationError",
    "FeedbackLaw",
    "IntegratorConfig",
    "InvalidInputError",
    "NumericFailure",
    "OptimalTransfer",
    "ProblemSpec",
    "SdpProblem",
    "SingularControlError",
    "SolverConfig",
    "Status",
    "analytic_2x2",
    "analytic_3chain",
    "analytic_reachable_2x2",
    "certify",
    "chain",
    "choose_repetitions",
    "closed_loop_xy",
    "conjecture_probe",
    "epsilon_kick",
    "feedback_controls",
    "load_problem",
    "numerical_rank",
    "physical_controls",
    "random_spec",
    "rank_bound",
    "rank_reduce",
    "reach_set",
    "reach_slice",
    "rescaled_time",
    "schedule_from_solution",
    "simulate_p",
    "simulate_r",
    "simulate_xy",
    "solve",
    "spectral_decompose",
    "trace_inner",
    "validate",
]
