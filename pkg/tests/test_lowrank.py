import numpy as np
import pytest

from bilinear_sdp.exceptions import NumericFailure
from bilinear_sdp.linalg import spectral_decompose
from bilinear_sdp.lowrank import (
    _boundary_step,
    band_width,
    barvinok_pataki_bound,
    conjecture_probe,
    numerical_rank,
    rank_bound,
    rank_reduce,
)
from bilinear_sdp.problem import chain, random_spec
from bilinear_sdp.sdp import SdpProblem, SolverConfig, solve
from conftest import random_psd

PRINTED_M = [[0.1775, 0.3225, 0.1304], [0.3225, 0.5856, 0.2368], [0.1304, 0.2368, 0.0958]]


class TestNumericalRank:
    def test_zero(self):
        assert numerical_rank(np.zeros((4, 4))) == 0

    def test_printed_matrix(self):
        assert numerical_rank(PRINTED_M, rel_tol=1e-3) == 1

    def test_constructed_rank_two(self, rng):
        v = rng.normal(size=(5, 2))
        assert numerical_rank(v @ v.T) == 2

    def test_abs_floor(self):
        assert numerical_rank(np.diag([1e-9, 0.0]), abs_tol=1e-8) == 0


class TestBounds:
    @pytest.mark.parametrize("k, r", [(0, 0), (1, 1), (2, 1), (3, 2), (5, 2), (6, 3), (10, 4), (11, 4)])
    def test_general_formula(self, k, r):
        assert barvinok_pataki_bound(k) == r
        assert r * (r + 1) // 2 <= k < (r + 1) * (r + 2) // 2

    def test_two_states(self):
        report = rank_bound(chain(2, 1.0))
        assert report.special_bound == 1 and report.bound == 1

    def test_three_states(self):
        report = rank_bound(random_spec(np.random.default_rng(0), 3))
        assert report.general_bound == 2
        assert report.special_bound == 1
        assert report.special_bound <= report.general_bound

    def test_tridiagonal_five(self):
        report = rank_bound(chain(5, 1.0))
        assert report.general_bound == 2
        assert report.special_bound == 2
        assert report.applicable_rule == "2-diagonal"

    def test_dense_has_no_special(self):
        report = rank_bound(random_spec(np.random.default_rng(1), 6))
        assert report.special_bound is None
        assert report.bound == 3

    def test_band_width(self):
        assert band_width(np.eye(4)) == 1
        assert band_width(chain(4, 1.0).A) == 2
        assert band_width(np.zeros((3, 3))) == 1


def _optimum(spec, cfg=None):
    problem = SdpProblem.from_spec(spec)
    return problem, solve(problem, cfg)


def _assert_reduced(problem, m, m0, obj_tol=1e-7):
    assert problem.objective_value(m0) == pytest.approx(problem.objective_value(m), abs=obj_tol)
    resid = problem.constraint_values(m0) - problem.rhs
    assert np.abs(resid).max() <= 1e-10
    assert spectral_decompose(m0).eigenvalues[-1] >= -1e-12


class TestRankReduce:
    def test_rank_one_unchanged(self, spec2):
        problem, sol = _optimum(spec2)
        m0 = rank_reduce(problem, sol.M)
        assert numerical_rank(m0) == 1
        np.testing.assert_allclose(m0, sol.M, atol=1e-7)

    def test_interior_three_by_three(self, spec3):
        problem = SdpProblem.from_spec(spec3)
        early = solve(problem, SolverConfig(max_iter=4))
        assert numerical_rank(early.M) == 3
        m0 = rank_reduce(problem, early.M)
        assert numerical_rank(m0) == 1
        assert problem.objective_value(m0) == pytest.approx(0.2821, abs=1e-3)

    def test_never_increases_rank(self):
        rng = np.random.default_rng(3)
        for _ in range(20):
            spec = random_spec(rng, int(rng.integers(2, 7)))
            problem, sol = _optimum(spec)
            m0 = rank_reduce(problem, sol.M)
            assert numerical_rank(m0) <= numerical_rank(sol.M)
            _assert_reduced(problem, sol.M, m0)

    def test_random_five_within_bound(self):
        rng = np.random.default_rng(17)
        for _ in range(15):
            spec = random_spec(rng, 5)
            problem, sol = _optimum(spec)
            m0 = rank_reduce(problem, sol.M)
            assert numerical_rank(m0) <= rank_bound(spec).bound

    def test_fixpoint_obeys_counting(self):
        # at the fixpoint r(r+1)/2 <= constraints + objective
        rng = np.random.default_rng(23)
        for _ in range(20):
            spec = random_spec(rng, int(rng.integers(2, 7)))
            problem, sol = _optimum(spec)
            r = numerical_rank(rank_reduce(problem, sol.M))
            assert r * (r + 1) // 2 <= len(problem.matrices) + 1

    def test_trace_bound(self):
        rng = np.random.default_rng(31)
        for _ in range(20):
            spec = random_spec(rng, int(rng.integers(2, 6)))
            problem, sol = _optimum(spec)
            m0 = rank_reduce(problem, sol.M)
            B = -(spec.A + spec.A.T)
            energy = problem.objective_value(m0)
            lam_min = spectral_decompose(B).eigenvalues[-1]
            bound = (spec.p0[spec.others].sum() - energy) / lam_min
            assert np.trace(m0) <= bound + 1e-8

    def test_tridiagonal_rank(self):
        rng = np.random.default_rng(4)
        for _ in range(10):
            spec = random_spec(rng, 5, kind="tridiagonal")
            problem, sol = _optimum(spec)
            assert numerical_rank(rank_reduce(problem, sol.M)) <= 2

    def test_ill_conditioned_step(self):
        with pytest.raises(NumericFailure):
            _boundary_step(np.array([1.0, 1e-13]), np.eye(2))

    def test_boundary_step_hits_zero(self, rng):
        lam = np.array([3.0, 2.0, 1.0])
        S = random_psd(rng, 3) - np.eye(3)
        out = _boundary_step(lam, S)
        w = np.linalg.eigvalsh(out)
        assert w.min() == pytest.approx(0.0, abs=1e-12)


class TestConjectureProbe:
    def test_small_dimensions_rank_one(self):
        report = conjecture_probe(50, [2, 3], seed=0)
        assert report.histogram(2) == {1: 50}
        assert report.histogram(3) == {1: 50}
        assert not report.violations
        assert max(report.drifts[2] + report.drifts[3]) <= 1e-7

    def test_larger_dimensions_reported(self):
        report = conjecture_probe(5, [4, 5], seed=2)
        for n in (4, 5):
            assert len(report.ranks[n]) + len(report.failures.get(n, [])) == 5
            assert 0.0 <= report.rank1_fraction(n) <= 1.0
        data = report.to_dict()
        assert set(data["by_n"]) == {"4", "5"}

    def test_worker_independent(self):
        serial = conjecture_probe(4, [3, 4], seed=9)
        pooled = conjecture_probe(4, [3, 4], seed=9, workers=2)
        assert serial.to_dict() == pooled.to_dict()

    def test_seed_changes_instances(self):
        a = conjecture_probe(3, [4], seed=1).drifts[4]
        b = conjecture_probe(3, [4], seed=2).drifts[4]
        assert a != b
