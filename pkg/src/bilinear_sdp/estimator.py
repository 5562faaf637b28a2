"""Estimator-style wrapper around the solve / reduce / synthesize pipeline."""

import numpy as np
from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_array, check_is_fitted

from .exceptions import InvalidInputError, NumericFailure
from .lowrank import numerical_rank, rank_reduce
from .problem import ProblemSpec, validate
from .reachable import reach_slice
from .sdp import SdpProblem, SolverConfig, solve
from .simulate import closed_loop_xy, simulate_r
from .synthesis import choose_repetitions, epsilon_kick, schedule_from_solution

__all__ = ["OptimalTransfer"]


class OptimalTransfer(BaseEstimator):
    """Maximal transfer into one state of a dissipative bilinear system.

    Parameters
    ----------
    A : array-like of shape (n, n)
        Coupling matrix with negative definite ``A + A^T``.
    target : int, default=-1
        Index of the state to maximize.
    gap_tol : float, default=1e-8
        Duality-gap tolerance of the interior-point solver.
    reduce_rank : bool, default=True
        Reduce the optimal ``M`` to low rank before building the schedule.

    Attributes
    ----------
    spec_ : ProblemSpec
    solution_ : SdpSolution
    M_ : ndarray of shape (n, n)
        Optimal (reduced) matrix.
    energy_ : float
        Optimal gain of the target's squared radius.
    rank_ : int
    schedule_ : ControlSchedule

    Examples
    --------
    >>> import numpy as np
    >>> est = OptimalTransfer(np.array([[-1., -1.], [1., -1.]])).fit([1.0, 0.0])
    >>> round(est.r_max_, 6)
    0.414214
    """

    def __init__(self, A, target=-1, gap_tol=1e-8, reduce_rank=True):
        self.A = A
        self.target = target
        self.gap_tol = gap_tol
        self.reduce_rank = reduce_rank

    def _spec(self, p0):
        return ProblemSpec(np.asarray(self.A, dtype=float), p0, self.target)

    def fit(self, X, y=None):
        """Solve for the initial point ``X`` (a single row of squared radii)."""
        X = check_array(X, ensure_2d=False)
        p0 = X.ravel()
        spec = self._spec(p0)
        report = validate(spec)
        if not report:
            raise InvalidInputError("; ".join(report.messages))
        problem = SdpProblem.from_spec(spec)
        sol = solve(problem, SolverConfig(gap_tol=self.gap_tol))
        if not sol.optimal:
            raise NumericFailure(f"solver finished with status {sol.status}")
        M = rank_reduce(problem, sol.M) if self.reduce_rank else sol.M
        self.spec_ = spec
        self.problem_ = problem
        self.solution_ = sol
        self.M_ = M
        self.energy_ = float(problem.objective_value(M))
        self.rank_ = numerical_rank(M)
        self.schedule_ = schedule_from_solution(M).with_repetitions(
            choose_repetitions(M, p0, spec.A)
        )
        self.n_features_in_ = spec.n
        return self

    @property
    def r_max_(self):
        check_is_fitted(self, "energy_")
        return float(np.sqrt(self.spec_.p0[self.spec_.target] + self.energy_))

    def predict(self, X):
        """Largest reachable target value for each row of non-target end values.

        Rows outside the reachable set give NaN.
        """
        check_is_fitted(self, "spec_")
        X = check_array(X)
        if X.shape[1] != self.spec_.n - 1:
            raise InvalidInputError(f"expected {self.spec_.n - 1} columns, got {X.shape[1]}")
        cfg = SolverConfig(gap_tol=self.gap_tol)
        out = np.empty(X.shape[0])
        for k, base in enumerate(X):
            s = reach_slice(self.spec_, base, cfg)
            out[k] = s.p_n_max if s.feasible else np.nan
        return out

    def simulate(self, eps=None, horizon=None, space="r"):
        """Run the synthesized feedback from the (kicked) initial radii."""
        check_is_fitted(self, "schedule_")
        r0 = np.sqrt(self.spec_.p0)
        if self.schedule_.rank:
            r0 = epsilon_kick(r0, self.schedule_.laws, eps)
        if space == "r":
            return simulate_r(self.spec_.A, self.schedule_, r0, horizon)
        if space == "xy":
            return closed_loop_xy(self.spec_.A, self.schedule_, r0, horizon)
        raise InvalidInputError(f"space must be 'r' or 'xy', got {space!r}")
