"""Reachable sets in p-space, swept one vertical line at a time.

For fixed values of the non-target coordinates the largest reachable target
value comes from one SDP. Every smaller non-negative target value on the
same line is reachable too: the direction ``m = e_target`` lowers only the
target coordinate (its rate is ``2 a_tt < 0``). The union of these segments
over a grid approximates the set.
"""

import csv
import itertools
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .exceptions import InvalidInputError
from .lowrank import numerical_rank, rank_reduce
from .problem import problem_from_dict, problem_to_dict
from .sdp import SdpProblem, SolverConfig, Status, solve

__all__ = ["ReachSlice", "ReachSet", "reach_slice", "reach_set", "default_grid"]

#: optima this far below zero are solver noise around an empty target
ZERO_TOL = 1e-7


@dataclass(frozen=True, eq=False)
class ReachSlice:
    """Result for one vertical line.

    ``p_n_max`` is ``None`` when the line misses the reachable set (the
    program is infeasible or its optimum gives a negative target value).
    """

    base: np.ndarray
    p_n_max: float = None
    rank: int = 0
    status: str = "optimal"
    message: str = ""

    @property
    def feasible(self):
        return self.p_n_max is not None

    def contains(self, p_n, tol=0.0):
        """Whether ``(base, p_n)`` lies on the reachable segment ``[0, p_n_max]``."""
        return self.feasible and -tol <= p_n <= self.p_n_max + tol


@dataclass(eq=False)
class ReachSet:
    slices: list
    target: int
    #: rate of the target coordinate under m = e_target (negative)
    down_rate: float

    def __len__(self):
        return len(self.slices)

    def __iter__(self):
        return iter(self.slices)

    def boundary(self):
        """Array of ``(base..., p_n_max)`` rows with NaN for infeasible slices."""
        rows = [
            list(s.base) + [s.p_n_max if s.feasible else np.nan] for s in self.slices
        ]
        return np.array(rows, dtype=float)

    def to_csv(self, path_or_file, digits=12):
        n1 = len(self.slices[0].base) if self.slices else 0
        header = [f"p_{i}" for i in range(1, n1 + 1)] + ["p_n_max", "feasible", "rank"]
        fmt = f"{{:.{digits}g}}"

        def write(fh):
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            for s in self.slices:
                w.writerow(
                    [fmt.format(b) for b in s.base]
                    + [fmt.format(s.p_n_max) if s.feasible else "", int(s.feasible), s.rank]
                )

        if hasattr(path_or_file, "write"):
            write(path_or_file)
        else:
            with open(path_or_file, "w", newline="") as fh:
                write(fh)


def reach_slice(spec, base, cfg=None):
    """Largest target value reachable with non-target coordinates ending at ``base``.

    Solves ``max <A_t, M>`` s.t. ``<A_i, M> = base_i - p0_i``, ``M >= 0``.
    Solver trouble is recorded on the slice rather than raised.
    """
    base = np.asarray(base, dtype=float).ravel()
    if base.shape[0] != spec.n - 1:
        raise InvalidInputError(f"base must have length {spec.n - 1}")
    if np.any(base < 0):
        raise InvalidInputError("base must be nonnegative")
    problem = SdpProblem.from_spec(spec, base=base)
    sol = solve(problem, cfg or SolverConfig())
    if sol.status is Status.INFEASIBLE:
        return ReachSlice(base, None, 0, sol.status.value, "program infeasible")
    if not sol.optimal:
        return ReachSlice(base, None, 0, sol.status.value, "solver did not converge")
    p_max = float(spec.p0[spec.target] + sol.objective_value)
    if p_max < -ZERO_TOL * (1.0 + abs(spec.p0[spec.target])):
        return ReachSlice(base, None, 0, sol.status.value, "optimum below zero")
    # eigenvalues at the solver's feasibility scale do not count
    floor = ZERO_TOL * (1.0 + np.abs(problem.rhs).sum())
    try:
        rank = numerical_rank(rank_reduce(problem, sol.M), abs_tol=floor)
    except ArithmeticError:
        rank = numerical_rank(sol.M, abs_tol=floor)
    return ReachSlice(base, max(p_max, 0.0), rank, sol.status.value)


def default_grid(spec, points=21):
    """``points`` evenly spaced values on ``[0, max(p0)]`` for each non-target axis."""
    top = float(spec.p0.max()) or 1.0
    return [np.linspace(0.0, top, points) for _ in spec.others]


def _slice_task(args):
    spec_dict, base, cfg = args
    return reach_slice(problem_from_dict(spec_dict), base, cfg)


def reach_set(spec, grids=None, *, workers=1, cfg=None):
    """One :func:`reach_slice` per point of the Cartesian product of ``grids``.

    ``grids`` holds one 1-D array per non-target coordinate (default
    :func:`default_grid`). Slices come back in grid order (last axis fastest)
    whatever ``workers`` is.
    """
    if grids is None:
        grids = default_grid(spec)
    grids = [np.asarray(g, dtype=float).ravel() for g in grids]
    if len(grids) != spec.n - 1:
        raise InvalidInputError(f"need {spec.n - 1} grids, got {len(grids)}")
    points = [np.array(p) for p in itertools.product(*grids)] if all(len(g) for g in grids) else []
    if workers > 1 and len(points) > 1:
        d = problem_to_dict(spec)
        with ProcessPoolExecutor(max_workers=workers) as pool:
            slices = list(pool.map(_slice_task, [(d, p, cfg) for p in points]))
    else:
        slices = [reach_slice(spec, p, cfg) for p in points]
    t = spec.target
    return ReachSet(slices, t, float(2.0 * spec.A[t, t]))
