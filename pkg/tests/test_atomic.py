import numpy as np
import pytest
from scipy import stats

from pslab.atomic import (
    AdmissibleNError,
    GapCapError,
    admissible_n,
    atomic_obedience_gap,
    convergence_experiment,
    equal_weight_scenario,
    loglog_fit,
    sample_realization,
    sample_realizations,
)
from pslab.mechanism import RecommendationRule, ScenarioError
from pslab.obedience import InvalidRuleError
from pslab.planner import solve_optimal_mechanism
from pslab.policy import AtomicPublicness

from conftest import make_scenario, pigou_state2, rule_of


class TestSampling:
    def test_point_mass(self, pigou):
        rule = RecommendationRule.point_mass((4,), 2, pigou.grid_m)
        assert {y for _, y in sample_realizations(rule, pigou, 7, 200)} == {(4,)}

    def test_deterministic(self, pigou, full_revelation):
        a = sample_realizations(full_revelation, pigou, 11, 500)
        assert a == sample_realizations(full_revelation, pigou, 11, 500)
        assert a[0] == sample_realization(full_revelation, pigou, 11)
        assert a != sample_realizations(full_revelation, pigou, 12, 500)

    def test_state_frequencies(self):
        scen = make_scenario(["e1", "e2"], [[0], [1]], ["a", "b", "c"], [0.2, 0.3, 0.5],
                             {"e1": [[1.0]] * 3, "e2": [[0, 1.0]] * 3}, grid_m=2)
        rule = RecommendationRule.point_mass((1,), 3, 2)
        n = 100_000
        counts = np.bincount([s for s, _ in sample_realizations(rule, scen, 3, n)], minlength=3)
        p = np.array([0.2, 0.3, 0.5])
        assert np.all(np.abs(counts - n * p) <= 3 * np.sqrt(n * p * (1 - p)))

    def test_atom_frequencies_chi_square(self, pigou):
        w = [0.1, 0.6, 0.3]
        rule = rule_of(pigou.grid_m, 1, [[((0,), w[0]), ((5,), w[1]), ((10,), w[2])]] * 2)
        draws = sample_realizations(rule, pigou, 99, 100_000)
        obs = np.array([sum(y == (g,) for _, y in draws) for g in (0, 5, 10)])
        assert stats.chisquare(obs, 100_000 * np.array(w)).pvalue > 1e-3

    def test_negative_count(self, pigou, full_revelation):
        with pytest.raises(ValueError):
            sample_realizations(full_revelation, pigou, 0, -1)


class TestGap:
    def test_single_route_single_traveler(self):
        scen = make_scenario(["e"], [[0]], ["s"], [1.0], {"e": [[1.0, 1.0]]}, grid_m=3)
        scen = scen.with_atomic(AtomicPublicness((1.0,), (0,)))
        assert atomic_obedience_gap(RecommendationRule.point_mass((0,), 1, 3), scen).max_gap == 0.0

    def test_two_travelers(self):
        scen = pigou_state2(grid_m=1, slope=1.0).with_atomic(AtomicPublicness((0.5, 0.5), (0, 0)))
        g = atomic_obedience_gap(RecommendationRule.point_mass((0,), 1, 1), scen)
        assert g.max_gap == 0.25 and g.witness_route == 1
        assert g.recommended == [1.0, 0.0] and g.deviation == [0.0, 1.0]

    def test_finite_n_distortion(self, pigou):
        scen = pigou.with_grid(5)
        rule = solve_optimal_mechanism(scen).rule
        assert atomic_obedience_gap(rule, equal_weight_scenario(scen, 2)).max_gap > 0.0

    def test_requires_atomic(self, pigou, full_revelation):
        with pytest.raises(ScenarioError):
            atomic_obedience_gap(full_revelation, pigou)

    def test_cap(self, pigou, full_revelation):
        scen = equal_weight_scenario(pigou, 4)
        with pytest.raises(GapCapError, match="reduce m or K"):
            atomic_obedience_gap(full_revelation, scen, cap=10)


class TestConvergence:
    def test_constant_zero(self, constant):
        rule = RecommendationRule.point_mass((3,), 2, constant.grid_m)
        rows = convergence_experiment(rule, constant, [1, 2, 5, 10])
        assert [r.max_gap for r in rows] == [0.0] * 4

    def test_pigou_decay(self, pigou):
        scen = pigou.with_grid(5)
        rule = solve_optimal_mechanism(scen).rule
        rows = convergence_experiment(rule, scen, [4, 16, 64, 256])
        gaps = [r.max_gap for r in rows]
        assert all(b < a for a, b in zip(gaps, gaps[1:]))
        assert gaps[-1] <= 0.1 * gaps[0]
        # affine costs: n * gap stays bounded
        assert max(n * g for n, g in zip((4, 16, 64, 256), gaps)) <= 4 * gaps[0] + 1e-15
        fit = loglog_fit([4, 16, 64, 256], gaps)
        assert fit.slope <= -0.8 and fit.r2 >= 0.95

    def test_deterministic_table(self, pigou):
        scen = pigou.with_grid(5)
        rule = solve_optimal_mechanism(scen).rule
        a = convergence_experiment(rule, scen, [2, 8])
        assert a == convergence_experiment(rule, scen, [2, 8])
        assert all(r.eval_ms is None for r in a)
        assert all(r.eval_ms >= 0 for r in convergence_experiment(rule, scen, [2], timing=True))

    def test_incompatible_n(self, pigou):
        scen = pigou.with_partition((0.25, 0.75)).with_grid(2)
        rule = solve_optimal_mechanism(scen).rule
        with pytest.raises(AdmissibleNError, match=r"admissible n.*\[4, 8, 12"):
            convergence_experiment(rule, scen, [6])

    def test_needs_obedient_rule(self, pigou, full_revelation):
        with pytest.raises(InvalidRuleError):
            convergence_experiment(full_revelation, pigou, [2])

    def test_admissible(self):
        assert admissible_n((0.5, 0.5), 7) == [2, 4, 6]
        assert admissible_n((1.0,), 3) == [1, 2, 3]


def test_loglog_exact_power():
    ns = np.array([2, 4, 8, 16])
    fit = loglog_fit(ns, 3.0 / ns ** 2)
    assert fit.slope == pytest.approx(-2.0) and fit.r2 == pytest.approx(1.0)
    with pytest.raises(ValueError):
        loglog_fit([1, 2], [0.0, 1.0])
