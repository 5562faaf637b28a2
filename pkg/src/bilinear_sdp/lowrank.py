"""Rank of optimal solutions: numerical rank, a-priori bounds, reduction.

Reduction works on a factor ``F`` with ``M = F F^T``:

1. Restrict to the range of ``M`` and look for a symmetric direction ``S``
   orthogonal (in the reduced space) to every constraint matrix and to the
   objective. Moving along ``S`` to the boundary of the PSD cone zeroes an
   eigenvalue while keeping all constraint and objective values fixed.
2. When no such direction exists, try to drop the smallest eigen-component
   and restore feasibility by Gauss-Newton on the factor. The candidate is
   accepted only if every constraint holds and the objective has not
   dropped by more than a tolerance, so the result is again optimal.
"""

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .exceptions import NumericFailure
from .linalg import spectral_decompose, sym_matrix
from .problem import random_spec, validate
from .sdp import SdpProblem, SolverConfig, solve

__all__ = [
    "RankBoundReport",
    "ProbeReport",
    "numerical_rank",
    "barvinok_pataki_bound",
    "band_width",
    "rank_bound",
    "rank_reduce",
    "conjecture_probe",
]

DEFAULT_RANK_TOL = 1e-8


def numerical_rank(m, rel_tol=DEFAULT_RANK_TOL, abs_tol=0.0):
    """Count eigenvalues at or above ``max(rel_tol * lambda_max, abs_tol)``.

    A zero matrix has rank 0.
    """
    w = spectral_decompose(m).eigenvalues
    floor = max(rel_tol * w[0], abs_tol, 1e-300)
    return int(np.sum(w >= floor))


def barvinok_pataki_bound(k):
    """Largest ``r`` with ``r (r + 1) / 2 <= k``, i.e. floor((sqrt(8k+1)-1)/2)."""
    return (math.isqrt(8 * k + 1) - 1) // 2


def band_width(A, atol=0.0):
    """Smallest ``r`` such that ``a_ij = 0`` whenever ``|i - j| >= r``."""
    A = np.asarray(A)
    i, j = np.nonzero(np.abs(A) > atol)
    return int(np.abs(i - j).max()) + 1 if i.size else 1


@dataclass(frozen=True)
class RankBoundReport:
    n: int
    general_bound: int
    special_bound: int = None
    applicable_rule: str = "general"

    @property
    def bound(self):
        if self.special_bound is None:
            return self.general_bound
        return min(self.general_bound, self.special_bound)


def rank_bound(spec):
    """A-priori rank bound for an optimal solution of the transfer program.

    The general bound counts ``n`` equalities (``n - 1`` constraints plus the
    fixed objective). Sharper bounds: rank <= 1 for ``n`` in {2, 3}, and
    rank <= r when ``A`` is r-diagonal.
    """
    n = spec.n
    general = barvinok_pataki_bound(n)
    candidates = []
    if n == 2:
        candidates.append((1, "n=2"))
    elif n == 3:
        candidates.append((1, "n=3"))
    r = band_width(spec.A)
    if r < n:
        candidates.append((r, f"{r}-diagonal"))
    if not candidates:
        return RankBoundReport(n, general)
    value, rule = min(candidates)
    return RankBoundReport(n, general, value, rule)


def _range_factor(M, rel_tol):
    w, v = spectral_decompose(M)
    keep = w > rel_tol * max(w[0], 1e-300)
    return v[:, keep] * np.sqrt(w[keep])


def _svec_map(mats, V):
    """Rows ``svec(V^T A V)`` so that ``row @ svec(S) = <V^T A V, S>``."""
    r = V.shape[1]
    iu = np.triu_indices(r)
    weight = np.where(iu[0] == iu[1], 1.0, 2.0)
    return np.array([(V.T @ a @ V)[iu] * weight for a in mats]), iu


def _null_direction(mats, V, null_tol):
    K, iu = _svec_map(mats, V)
    norms = np.linalg.norm(K, axis=1)
    K = K[norms > 0] / norms[norms > 0, None]
    dim = len(iu[0])
    if K.shape[0] == 0:
        c = np.zeros(dim)
        c[0] = 1.0
    else:
        _, s, vt = np.linalg.svd(K)
        if dim > K.shape[0]:
            c = vt[-1]
        elif s[-1] <= null_tol * s[0]:
            c = vt[-1]
        else:
            return None
    r = V.shape[1]
    S = np.zeros((r, r))
    S[iu] = c
    return S + np.triu(S, 1).T


def _boundary_step(lam, S):
    """Move ``diag(lam) + t S`` until one eigenvalue hits zero."""
    if lam[0] / lam[-1] > 1e12:
        raise NumericFailure("reduced matrix ill-conditioned beyond 1e12")
    s = 1.0 / np.sqrt(lam)
    mu = np.linalg.eigvalsh(S * np.outer(s, s))
    if abs(mu[-1]) >= abs(mu[0]):
        t = -1.0 / mu[-1]
    else:
        t = -1.0 / mu[0]
    return np.diag(lam) + t * S


def _gauss_newton(F, mats, alpha, tol, max_iter=40):
    """Minimum-norm Gauss-Newton on ``<A_i, F F^T> = alpha_i``."""
    n, r = F.shape
    res = None
    for _ in range(max_iter):
        M = F @ F.T
        res = np.array([np.sum(a * M) for a in mats]) - alpha
        if np.linalg.norm(res) <= tol:
            return F, True
        J = np.array([2.0 * (a @ F).ravel() for a in mats])
        step, *_ = np.linalg.lstsq(J, -res, rcond=None)
        F = F + step.reshape(n, r)
    return F, bool(res is not None and np.linalg.norm(res) <= tol)


def rank_reduce(problem, m, *, rel_tol=DEFAULT_RANK_TOL, drift_tol=1e-8, null_tol=1e-10):
    """Return an optimal solution of rank no larger than that of ``m``.

    ``m`` must be feasible and optimal for ``problem``. The result satisfies
    the constraints of ``problem`` to roughly machine precision; its
    objective is at least that of ``m`` minus ``drift_tol * (1 + |objective|)``
    and can exceed it only by the optimality gap of ``m``.

    Raises
    ------
    NumericFailure
        If the reduced matrix becomes ill-conditioned beyond 1e12.
    """
    M = sym_matrix(m)
    obj = problem.objective_value(M)
    cons = list(problem.matrices)
    rhs = problem.rhs
    both = cons + [problem.objective]
    feas_tol = 1e-13 * (1.0 + np.linalg.norm(rhs)) * max(1.0, np.abs(M).max())
    obj_tol = drift_tol * (1.0 + abs(obj))

    def drift_ok(F):
        # a feasible point can only gain up to the interior-point gap, so
        # only losses count against the tolerance
        return problem.objective_value(F @ F.T) >= obj - obj_tol

    F = _range_factor(M, rel_tol)
    start_rank = F.shape[1]
    while F.shape[1] > 0:
        # null directions: exact rank decrease, objective fixed
        while F.shape[1] > 0:
            U, sv, _ = np.linalg.svd(F, full_matrices=False)
            S = _null_direction(both, U, null_tol)
            if S is None:
                break
            Mr = _boundary_step(sv * sv, S)
            w, q = np.linalg.eigh(0.5 * (Mr + Mr.T))
            keep = w > rel_tol * max(w.max(), 1e-300)
            F = (U @ q[:, keep]) * np.sqrt(w[keep])
        if F.shape[1] <= 1:
            break
        # deflation: drop the weakest component if feasibility can be restored
        U, sv, _ = np.linalg.svd(F, full_matrices=False)
        cand, ok = _gauss_newton(U[:, :-1] * sv[:-1], cons, rhs, feas_tol)
        if not (ok and drift_ok(cand)):
            break
        F = cand

    if F.shape[1]:
        polished, ok = _gauss_newton(F, cons, rhs, feas_tol)
        if ok and drift_ok(polished):
            F = polished
    if F.shape[1] > start_rank:  # pragma: no cover - guarded by construction
        raise NumericFailure("rank increased during reduction")
    return F @ F.T


@dataclass
class ProbeReport:
    """Outcome of the rank-1 probe, keyed by dimension ``n``."""

    seed: int
    count: int
    kind: str
    ranks: dict = field(default_factory=dict)
    drifts: dict = field(default_factory=dict)
    failures: dict = field(default_factory=dict)
    violations: list = field(default_factory=list)

    def histogram(self, n):
        hist = {}
        for r in self.ranks.get(n, []):
            hist[r] = hist.get(r, 0) + 1
        return dict(sorted(hist.items()))

    def rank1_fraction(self, n):
        ranks = self.ranks.get(n, [])
        return sum(r <= 1 for r in ranks) / len(ranks) if ranks else float("nan")

    def to_dict(self):
        out = {"seed": self.seed, "count": self.count, "kind": self.kind, "by_n": {}}
        for n in sorted(self.ranks):
            out["by_n"][str(n)] = {
                "rank_histogram": {str(k): v for k, v in self.histogram(n).items()},
                "rank1_fraction": self.rank1_fraction(n),
                "max_objective_drift": max(self.drifts[n], default=0.0),
                "objective_drifts": list(self.drifts[n]),
                "failures": list(self.failures.get(n, [])),
            }
        out["violations"] = list(self.violations)
        return out


def _probe_one(args):
    seed, n, index, kind, cfg = args
    rng = np.random.default_rng([seed, n, index])
    spec = random_spec(rng, n, kind)
    if not validate(spec):
        return index, None, None, "invalid instance"
    problem = SdpProblem.from_spec(spec)
    sol = solve(problem, cfg)
    if not sol.optimal:
        return index, None, None, f"solver status {sol.status}"
    try:
        M0 = rank_reduce(problem, sol.M)
    except NumericFailure as exc:
        return index, None, None, f"reduction failed: {exc}"
    drift = abs(problem.objective_value(M0) - sol.objective_value)
    return index, numerical_rank(M0), drift, None


def conjecture_probe(count, n_range, seed, *, kind="dense", workers=1, cfg=None):
    """Solve and reduce ``count`` random instances for each ``n`` in ``n_range``.

    Instance ``i`` of dimension ``n`` draws from a stream seeded by
    ``(seed, n, i)``, so results do not depend on ``workers``. Ranks above 1
    for ``n`` in {2, 3} contradict the known bounds and are listed in
    ``violations``; larger ``n`` is only reported.
    """
    cfg = cfg or SolverConfig()
    report = ProbeReport(seed=seed, count=count, kind=kind)
    tasks = [(seed, n, i, kind, cfg) for n in n_range for i in range(count)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_probe_one, tasks))
    else:
        results = [_probe_one(t) for t in tasks]
    for (_, n, _, _, _), (index, rank, drift, err) in zip(tasks, results):
        report.ranks.setdefault(n, [])
        report.drifts.setdefault(n, [])
        if err is not None:
            report.failures.setdefault(n, []).append({"index": index, "error": err})
            continue
        report.ranks[n].append(rank)
        report.drifts[n].append(drift)
        if n in (2, 3) and rank > 1:
            report.violations.append({"n": n, "index": index, "rank": rank})
    return report
