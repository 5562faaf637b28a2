"""Primal-dual interior-point solver for small dense semidefinite programs.

The program is kept in maximization form::

    maximize    <C, M>
    subject to  <A_i, M> = b_i,   i = 1..k
                M >= 0 (positive semidefinite)

with dual ``minimize b^T y`` s.t. ``Z = sum_i y_i A_i - C >= 0``.

Internally the iteration runs on the equivalent minimization of ``<-C, M>``
using Nesterov-Todd scaling and a Mehrotra predictor-corrector step.
"""

import logging
from dataclasses import dataclass, field, replace
from enum import Enum

import numpy as np

from .exceptions import FactorizationError, InvalidInputError
from .linalg import solve_spd, spectral_decompose, sym_matrix
from .problem import build_constraints

__all__ = [
    "Status",
    "SolverConfig",
    "SdpProblem",
    "SdpSolution",
    "CertReport",
    "solve",
    "certify",
]

logger = logging.getLogger(__name__)


class Status(str, Enum):
    OPTIMAL = "optimal"
    MAX_ITERATIONS = "max-iterations"
    NUMERIC_FAILURE = "numeric-failure"
    INFEASIBLE = "infeasible-detected"
    UNBOUNDED = "unbounded-detected"

    def __str__(self):
        return self.value


@dataclass(frozen=True)
class SolverConfig:
    gap_tol: float = 1e-8
    feas_tol: float = 1e-8
    max_iter: int = 200
    verbose: bool = False
    step_fraction: float = 0.98
    stall_window: int = 20
    degenerate_delta: float = 1e-10

    @classmethod
    def from_dict(cls, data):
        known = {k: data[k] for k in ("gap_tol", "feas_tol", "max_iter", "verbose") if k in data}
        return cls(**known)


@dataclass(frozen=True, eq=False)
class SdpProblem:
    """Objective ``C`` (maximized) and equality constraints ``(A_i, b_i)``.

    ``upper_bound`` is an a-priori bound on the optimum when one is known;
    it drives unboundedness detection and the certificate's bound check.
    """

    objective: np.ndarray
    matrices: tuple
    rhs: np.ndarray
    upper_bound: float = None

    def __post_init__(self):
        C = sym_matrix(self.objective, name="objective")
        mats = tuple(sym_matrix(a, name=f"A_{i}") for i, a in enumerate(self.matrices))
        rhs = np.asarray(self.rhs, dtype=float).ravel()
        if any(a.shape != C.shape for a in mats):
            raise InvalidInputError("all matrices must share the objective's dimension")
        if rhs.shape[0] != len(mats):
            raise InvalidInputError("one right-hand side value per constraint matrix")
        object.__setattr__(self, "objective", C)
        object.__setattr__(self, "matrices", mats)
        object.__setattr__(self, "rhs", rhs)

    @property
    def n(self):
        return self.objective.shape[0]

    @property
    def constraints(self):
        return list(zip(self.matrices, self.rhs))

    def constraint_values(self, M):
        return np.array([float(np.sum(a * M)) for a in self.matrices])

    def objective_value(self, M):
        return float(np.sum(self.objective * M))

    def with_rhs(self, rhs):
        return replace(self, rhs=np.asarray(rhs, dtype=float))

    @classmethod
    def from_spec(cls, spec, base=None):
        """Transfer program for a problem instance (or one reachable-set slice).

        The dual point ``y = -1`` has slack ``-(A + A^T)``, positive definite
        for valid instances, so ``-sum(b)`` bounds the optimum.
        """
        cs = build_constraints(spec, base)
        mats = tuple(cs.matrices[i] for i in cs.indices)
        return cls(cs.objective, mats, cs.rhs, upper_bound=float(-np.sum(cs.rhs)))


@dataclass(frozen=True, eq=False)
class SdpSolution:
    M: np.ndarray
    dual_y: np.ndarray
    dual_slack: np.ndarray
    objective_value: float
    dual_value: float
    gap: float
    primal_residual: float
    dual_residual: float
    iterations: int
    status: Status
    perturbed: bool = False
    history: tuple = field(default=(), repr=False)

    @property
    def optimal(self):
        return self.status is Status.OPTIMAL

    def diagnostics(self):
        return {
            "status": str(self.status),
            "iterations": self.iterations,
            "objective": self.objective_value,
            "dual_objective": self.dual_value,
            "gap": self.gap,
            "primal_residual": self.primal_residual,
            "dual_residual": self.dual_residual,
            "perturbed": self.perturbed,
        }


@dataclass(frozen=True)
class IterateRecord:
    """Per-iteration values in maximization form."""

    iteration: int
    primal: float
    dual: float
    gap: float
    primal_residual: float
    dual_residual: float


def _rel_gap(pobj, dobj):
    return abs(dobj - pobj) / (1.0 + abs(pobj) + abs(dobj))


def _max_step(d, D):
    """Largest alpha with diag(d) + alpha * D positive semidefinite."""
    s = 1.0 / np.sqrt(d)
    K = D * np.outer(s, s)
    lam = np.linalg.eigvalsh(0.5 * (K + K.T))[0]
    return np.inf if lam >= 0 else -1.0 / lam


def _ipm(problem, rhs, cfg):
    n = problem.n
    k = len(problem.matrices)
    C = -problem.objective  # minimization data
    Amat = np.array([a.ravel() for a in problem.matrices]).reshape(k, n * n)
    b = rhs

    def op(X):
        return Amat @ X.ravel()

    def adj(y):
        return (Amat.T @ y).reshape(n, n)

    tau = 1.0 + (np.abs(b).max() if k else 0.0)
    X = tau * np.eye(n)
    Z = tau * np.eye(n)
    y = np.zeros(k)
    nb = 1.0 + np.linalg.norm(b)
    nc = 1.0 + np.linalg.norm(C)
    history = []
    merits = []
    status = Status.MAX_ITERATIONS
    it = 0
    stalled = False

    def snapshot():
        pobj = float(np.sum(C * X))
        dobj = float(b @ y)
        pres = float(np.linalg.norm(b - op(X)) / nb)
        dres = float(np.linalg.norm(C - Z - adj(y)) / nc)
        return pobj, dobj, _rel_gap(pobj, dobj), pres, dres

    for it in range(cfg.max_iter + 1):
        pobj, dobj, gap, pres, dres = snapshot()
        merit = max(gap, pres, dres)
        merits.append(merit)
        history.append(IterateRecord(it, -pobj, -dobj, gap, pres, dres))
        if __debug__ and pres <= cfg.feas_tol and dres <= cfg.feas_tol:
            # weak duality in maximization form: dual value >= primal value
            assert -dobj >= -pobj - 1e-6 * (1.0 + abs(pobj)), "weak duality violated"
        if cfg.verbose:
            logger.info("it %3d  pobj % .10e  dobj % .10e  gap %.2e  pres %.2e  dres %.2e",
                        it, -pobj, -dobj, gap, pres, dres)
        if gap <= cfg.gap_tol and pres <= cfg.feas_tol and dres <= cfg.feas_tol:
            status = Status.OPTIMAL
            break
        if pres <= 1e-6 and problem.upper_bound is not None:
            ub = problem.upper_bound
            if -pobj > ub + 1e3 * (1.0 + abs(ub)):
                status = Status.UNBOUNDED
                break
        if np.linalg.norm(X) > 1e12:
            status = Status.UNBOUNDED
            break
        if np.linalg.norm(y) > 1e12 or np.linalg.norm(Z) > 1e12:
            status = Status.INFEASIBLE
            break
        w = cfg.stall_window
        if it >= w and merit > 0.5 * merits[-1 - w]:
            stalled = True
            break
        if it == cfg.max_iter:
            break

        Rp = b - op(X)
        Rd = C - Z - adj(y)
        try:
            L = np.linalg.cholesky(X)
            R = np.linalg.cholesky(Z)
        except np.linalg.LinAlgError:
            status = Status.NUMERIC_FAILURE
            break
        _, d, Qt = np.linalg.svd(R.T @ L)
        if d.min() <= 0:
            status = Status.NUMERIC_FAILURE
            break
        sq = np.sqrt(d)
        G = (L @ Qt.T) / sq
        Ginv = sq[:, None] * (Qt @ np.linalg.inv(L))
        W = G @ G.T
        WA = [W @ a for a in problem.matrices]
        S = np.empty((k, k))
        for i in range(k):
            for j in range(i, k):
                S[i, j] = S[j, i] = np.sum(WA[i] * WA[j].T)
        WRdW = W @ Rd @ W
        mu = float(np.sum(X * Z)) / n
        dd = d[:, None] + d[None, :]

        def direction(Rs):
            H = 2.0 * Rs / dd
            Rc = G @ H @ G.T
            if k:
                dy = solve_spd(S, Rp - op(Rc) + op(WRdW))
            else:
                dy = np.zeros(0)
            dZ = Rd - adj(dy)
            dX = Rc - W @ dZ @ W
            return 0.5 * (dX + dX.T), dy, 0.5 * (dZ + dZ.T)

        try:
            dXa, dya, dZa = direction(-np.diag(d * d))
            dXs = Ginv @ dXa @ Ginv.T
            dZs = G.T @ dZa @ G
            ap = min(1.0, _max_step(d, dXs))
            ad = min(1.0, _max_step(d, dZs))
            sigma = (np.sum((X + ap * dXa) * (Z + ad * dZa)) / (n * mu)) ** 3
            sigma = float(np.clip(sigma, 0.0, 1.0))
            Rs = sigma * mu * np.eye(n) - np.diag(d * d) - 0.5 * (dXs @ dZs + dZs @ dXs)
            dX, dy, dZ = direction(Rs)
        except FactorizationError:
            status = Status.NUMERIC_FAILURE
            break
        dXs = Ginv @ dX @ Ginv.T
        dZs = G.T @ dZ @ G
        ap = min(1.0, cfg.step_fraction * _max_step(d, dXs))
        ad = min(1.0, cfg.step_fraction * _max_step(d, dZs))
        X = X + ap * dX
        Z = Z + ad * dZ
        y = y + ad * dy
        X = 0.5 * (X + X.T)
        Z = 0.5 * (Z + Z.T)

    pobj, dobj, gap, pres, dres = snapshot()
    return SdpSolution(
        M=X,
        dual_y=-y,
        dual_slack=Z,
        objective_value=-pobj,
        dual_value=-dobj,
        gap=gap,
        primal_residual=pres,
        dual_residual=dres,
        iterations=it,
        status=status,
        history=tuple(history),
    ), stalled


def solve(problem, cfg=None):
    """Solve ``problem`` and return an :class:`SdpSolution`.

    Failure modes (iteration cap, numerical breakdown, detected infeasibility
    or unboundedness) are reported through ``status``, not raised.

    If progress stalls and some right-hand side entries are exactly zero
    (an initial coordinate already empty, where strict feasibility may fail),
    the solve is retried once with those entries set to ``-degenerate_delta``
    and the solution is flagged ``perturbed``.
    """
    cfg = cfg or SolverConfig()
    sol, stalled = _ipm(problem, problem.rhs, cfg)
    if not stalled:
        return sol
    zero = problem.rhs == 0.0
    if np.any(zero):
        rhs = np.where(zero, -cfg.degenerate_delta, problem.rhs)
        retry, stalled_again = _ipm(problem, rhs, cfg)
        if not stalled_again or retry.optimal:
            return replace(retry, perturbed=True)
        sol = retry
    return replace(sol, status=Status.MAX_ITERATIONS)


@dataclass(frozen=True)
class CertReport:
    min_eig_M: float
    min_eig_Z: float
    residuals: np.ndarray
    dual_residual: float
    complementarity: float
    gap: float
    bound_slack: float
    flagged: tuple
    checks: dict

    @property
    def passed(self):
        return all(self.checks.values())

    def __bool__(self):
        return self.passed


def certify(problem, sol, *, psd_floor=-1e-9, feas_tol=1e-8, gap_tol=1e-7, bound_tol=1e-7):
    """Check a claimed optimum from first principles.

    Recomputes primal feasibility (eigenvalue floor and per-constraint
    residuals), dual feasibility of ``(y, Z)``, complementarity, the relative
    duality gap and, when the problem carries one, the a-priori bound.
    """
    M = sym_matrix(sol.M)
    y = np.asarray(sol.dual_y, dtype=float)
    Z = sym_matrix(sol.dual_slack)
    b = problem.rhs
    residuals = problem.constraint_values(M) - b
    scale_b = 1.0 + np.linalg.norm(b)
    flagged = tuple(int(i) for i in np.flatnonzero(np.abs(residuals) > feas_tol * scale_b))
    z_expected = sum((yi * a for yi, a in zip(y, problem.matrices)), np.zeros_like(M)) - problem.objective
    dual_res = float(np.linalg.norm(z_expected - Z) / (1.0 + np.linalg.norm(problem.objective)))
    pobj = problem.objective_value(M)
    dobj = float(b @ y)
    gap = _rel_gap(pobj, dobj)
    min_m = float(spectral_decompose(M).eigenvalues[-1])
    min_z = float(spectral_decompose(Z).eigenvalues[-1])
    scale_m = max(1.0, float(np.abs(M).max()))
    scale_z = max(1.0, float(np.abs(Z).max()))
    slack = np.inf if problem.upper_bound is None else problem.upper_bound - pobj
    checks = {
        "primal_psd": min_m >= psd_floor * scale_m,
        "primal_feasible": not flagged,
        "dual_psd": min_z >= psd_floor * scale_z,
        "dual_feasible": dual_res <= feas_tol,
        "gap": gap <= gap_tol,
        "bound": slack >= -bound_tol,
    }
    return CertReport(
        min_eig_M=min_m,
        min_eig_Z=min_z,
        residuals=residuals,
        dual_residual=dual_res,
        complementarity=float(np.sum(M * Z)),
        gap=gap,
        bound_slack=float(slack),
        flagged=flagged,
        checks=checks,
    )
