import math

import numpy as np
import pytest

from bilinear_sdp.exceptions import InvalidInputError
from bilinear_sdp.lowrank import rank_reduce
from bilinear_sdp.oracles import analytic_2x2
from bilinear_sdp.problem import ProblemSpec, chain, feasible_seed, random_spec
from bilinear_sdp.sdp import SdpProblem, SdpSolution, SolverConfig, Status, certify, solve


def solve_spec(spec, cfg=None):
    problem = SdpProblem.from_spec(spec)
    return problem, solve(problem, cfg)


class TestSolveExamples:
    def test_two_by_two(self, spec2):
        _, sol = solve_spec(spec2)
        assert sol.optimal
        assert sol.objective_value == pytest.approx(3 - 2 * math.sqrt(2), abs=1e-6)

    @pytest.mark.parametrize("xi", [0.1, 0.5, 2.0, 5.0])
    def test_two_by_two_closed_form(self, xi):
        _, sol = solve_spec(chain(2, xi, p0=[1.0, 0.0]))
        assert sol.objective_value == pytest.approx(analytic_2x2(xi).p_gain, abs=1e-6)

    def test_zero_start(self):
        problem, sol = solve_spec(chain(3, 1.0, p0=[0.0, 0.0, 0.0]))
        assert sol.optimal
        assert abs(sol.objective_value) <= 1e-7
        assert np.abs(sol.M).max() <= 1e-7

    def test_three_by_three(self, spec3):
        problem, sol = solve_spec(spec3)
        assert sol.objective_value == pytest.approx(0.2821, abs=1e-3)
        M = rank_reduce(problem, sol.M)
        expected = [[0.1775, 0.3225, 0.1304], [0.3225, 0.5856, 0.2368], [0.1304, 0.2368, 0.0958]]
        np.testing.assert_allclose(M, expected, atol=2e-3)

    def test_target_not_last(self):
        # maximizing the first state of the reversed chain mirrors the standard case
        spec = chain(3, 1.0, p0=[1.0, 1.0, 0.0])
        flipped = spec.permuted([2, 1, 0])
        assert flipped.target == 0
        _, a = solve_spec(spec)
        _, b = solve_spec(flipped)
        assert b.objective_value == pytest.approx(a.objective_value, abs=1e-7)


class TestStatuses:
    def test_infeasible(self):
        prob = SdpProblem(np.zeros((2, 2)), (np.eye(2),), [-1.0])
        assert solve(prob).status is Status.INFEASIBLE

    def test_unbounded_without_constraints(self):
        assert solve(SdpProblem(np.eye(2), (), [])).status is Status.UNBOUNDED

    def test_unbounded_beyond_bound(self):
        prob = SdpProblem(np.eye(2), (np.diag([1.0, 0.0]),), [1.0], upper_bound=1.0)
        assert solve(prob).status is Status.UNBOUNDED

    def test_iteration_cap(self, spec3):
        _, sol = solve_spec(spec3, SolverConfig(max_iter=3))
        assert sol.status is Status.MAX_ITERATIONS
        assert not sol.optimal

    def test_no_constraints_bounded(self):
        sol = solve(SdpProblem(-np.eye(2), (np.eye(2),), [2.0]))
        assert sol.optimal
        assert sol.objective_value == pytest.approx(-2.0, abs=1e-7)


class TestProblemData:
    def test_shape_mismatch(self):
        with pytest.raises(InvalidInputError):
            SdpProblem(np.eye(2), (np.eye(3),), [1.0])

    def test_rhs_count(self):
        with pytest.raises(InvalidInputError):
            SdpProblem(np.eye(2), (np.eye(2),), [1.0, 2.0])

    def test_config_from_dict(self):
        cfg = SolverConfig.from_dict({"gap_tol": 1e-9, "max_iter": 50, "ignored": 1})
        assert cfg.gap_tol == 1e-9 and cfg.max_iter == 50

    def test_upper_bound_is_sum_of_others(self, spec3):
        assert SdpProblem.from_spec(spec3).upper_bound == pytest.approx(2.0)

    def test_diagnostics_keys(self, spec2):
        _, sol = solve_spec(spec2)
        d = sol.diagnostics()
        assert d["status"] == "optimal"
        assert {"gap", "primal_residual", "dual_residual", "iterations"} <= set(d)


class TestWeakDuality:
    def test_feasible_iterates(self, spec3):
        _, sol = solve_spec(spec3)
        feasible = [h for h in sol.history if h.primal_residual <= 1e-8 and h.dual_residual <= 1e-8]
        assert feasible
        for h in feasible:
            assert h.dual >= h.primal - 1e-9

    def test_final_bound(self, spec2):
        _, sol = solve_spec(spec2)
        assert sol.dual_value >= sol.objective_value - 1e-9


class TestCertify:
    def test_three_by_three_passes(self, spec3):
        problem, sol = solve_spec(spec3)
        cert = certify(problem, sol)
        assert cert.passed
        assert cert.gap <= 1e-7
        assert cert.complementarity == pytest.approx(0.0, abs=1e-7)

    def test_violated_constraint_flagged(self, spec3):
        problem, sol = solve_spec(spec3)
        M = sol.M.copy()
        M[0, 0] += 0.5  # <A_1, M> changes by 2 * a_11 * 0.5 = -1
        bad = SdpSolution(**{**sol.__dict__, "M": M})
        cert = certify(problem, bad)
        assert not cert
        assert 0 in cert.flagged
        assert not cert.checks["primal_feasible"]

    def test_seed_is_feasible_not_optimal(self, spec3):
        problem, sol = solve_spec(spec3)
        seed = feasible_seed(spec3)
        fake = SdpSolution(
            **{**sol.__dict__, "M": seed, "objective_value": problem.objective_value(seed)}
        )
        cert = certify(problem, fake)
        assert cert.checks["primal_feasible"] and cert.checks["primal_psd"]
        assert not cert.checks["gap"]


class TestRandomInstances:
    def test_hundred_instances(self):
        rng = np.random.default_rng(99)
        for _ in range(100):
            spec = random_spec(rng, int(rng.integers(2, 7)))
            problem, sol = solve_spec(spec)
            assert sol.optimal, sol.diagnostics()
            bound = spec.p0[spec.others].sum()
            seed_obj = problem.objective_value(feasible_seed(spec))
            assert seed_obj - 1e-9 <= sol.objective_value <= bound + 1e-7
            resid = np.abs(problem.constraint_values(sol.M) - problem.rhs).max()
            assert resid <= 1e-8 * (1 + np.linalg.norm(problem.rhs))
            assert certify(problem, sol)

    @pytest.mark.parametrize("c", [0.5, 2.0])
    def test_rescaling_invariance(self, c):
        rng = np.random.default_rng(5)
        for _ in range(10):
            spec = random_spec(rng, int(rng.integers(2, 6)))
            problem, a = solve_spec(spec)
            _, b = solve_spec(ProblemSpec(c * spec.A, spec.p0))
            assert b.objective_value == pytest.approx(a.objective_value, abs=1e-7)
            # c * M maps the scaled feasible set onto the original one
            resid = problem.constraint_values(c * b.M) - problem.rhs
            assert np.abs(resid).max() <= 1e-8 * (1 + np.linalg.norm(problem.rhs))

    def test_permuting_other_states(self):
        rng = np.random.default_rng(8)
        for _ in range(10):
            spec = random_spec(rng, 4)
            perm = np.r_[rng.permutation(3), 3]
            _, a = solve_spec(spec)
            _, b = solve_spec(spec.permuted(perm))
            assert b.objective_value == pytest.approx(a.objective_value, abs=1e-7)

    def test_degenerate_start_solves(self):
        # zero entries in p0 among the constrained states
        spec = chain(4, 0.5, p0=[1.0, 0.0, 0.0, 0.2])
        problem, sol = solve_spec(spec)
        assert sol.optimal
        assert certify(problem, sol)
