import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from pslab.costs import (
    EmptyConditioningError,
    expected_cost_atomic,
    expected_cost_nonatomic,
    marginal_mass,
    planner_value,
    profile_table,
)
from pslab.mechanism import RecommendationRule
from pslab.policy import AtomicPublicness

from conftest import make_scenario, pigou_state2, rule_of

TOP, BOTTOM = 0, 10  # grid indices of (1,0) and (0,1) at m=10


class TestNonatomic:
    def test_full_revelation_obedient_side(self, pigou, full_revelation):
        # hand enumeration: only s1 sends (0,1); p=0.5, weight 1, cost 0.5*1
        assert expected_cost_nonatomic(full_revelation, pigou, 0, BOTTOM, [0, 1]) == 0.25

    def test_full_revelation_deviation(self, pigou, full_revelation):
        # only s2 sends (1,0); e2 carries no load there
        assert expected_cost_nonatomic(full_revelation, pigou, 0, TOP, [0, 1]) == 0.0

    def test_empty_conditioning(self, pigou, full_revelation):
        with pytest.raises(EmptyConditioningError, match="empty conditioning event"):
            expected_cost_nonatomic(full_revelation, pigou, 0, 5, [1, 0])

    def test_constant_costs(self, constant):
        rule = rule_of(10, 1, [[((2,), 0.4), ((7,), 0.6)], [((2,), 1.0)]])
        for g, dev in ((2, [0.3, 0.7]), (7, [1, 0])):
            mass = marginal_mass(rule, constant, 0, g)
            # per-state constant c_s with p-weighted mass
            expect = sum(constant.network.prior[s] * w * (1.0 if s == 0 else 2.0)
                         for s, prof, w in rule.iter_atoms() if prof[0] == g)
            assert expected_cost_nonatomic(rule, constant, 0, g, dev) == pytest.approx(expect, abs=1e-15)
            assert mass > 0

    def test_min_attained_at_vertex(self, diamond, rng):
        scen = diamond.with_partition((0.5, 0.5)).with_grid(2)
        grid = scen.grid()
        P = len(grid) ** 2
        profs = np.indices((len(grid),) * 2).reshape(2, -1).T
        w = rng.dirichlet(np.ones(P), size=2)
        rule = RecommendationRule.from_weights(w, profs, 2)
        for k in range(2):
            for g in range(len(grid)):
                vals = [expected_cost_nonatomic(rule, scen, k, g, y) for y in grid.policies]
                pure = [vals[i] for i in grid.pure_indices()]
                assert min(vals) == min(pure)

    def test_linear_in_rule_weights(self, pigou, rng):
        G = len(pigou.grid())
        profs = np.arange(G)[:, None]
        a = RecommendationRule.from_weights(rng.dirichlet(np.ones(G), size=2), profs, 10)
        b = RecommendationRule.from_weights(rng.dirichlet(np.ones(G), size=2), profs, 10)
        for alpha in (0.2, 0.5, 0.9):
            mix = a.mixture(b, alpha)
            for g in range(G):
                for dev in ([1, 0], [0, 1], [0.3, 0.7]):
                    lhs = expected_cost_nonatomic(mix, pigou, 0, g, dev)
                    rhs = ((1 - alpha) * expected_cost_nonatomic(a, pigou, 0, g, dev)
                           + alpha * expected_cost_nonatomic(b, pigou, 0, g, dev))
                    assert lhs == pytest.approx(rhs, abs=1e-13)

    @settings(max_examples=60, deadline=None)
    @given(st.floats(0, 1), st.floats(0, 1), st.floats(0, 1))
    def test_linear_in_deviation(self, a, p, q):
        from pslab import corpus

        scen = corpus.scenario("pigou2")
        rule = corpus.rule("pigou2_full_revelation", scen)
        u, v = np.array([p, 1 - p]), np.array([q, 1 - q])
        lhs = expected_cost_nonatomic(rule, scen, 0, BOTTOM, a * u + (1 - a) * v)
        rhs = (a * expected_cost_nonatomic(rule, scen, 0, BOTTOM, u)
               + (1 - a) * expected_cost_nonatomic(rule, scen, 0, BOTTOM, v))
        assert lhs == pytest.approx(rhs, abs=1e-12)


class TestAtomic:
    def test_monopoly(self):
        scen = pigou_state2(grid_m=1, slope=2.0)
        scen = scen.with_atomic(AtomicPublicness((1.0,), (0,)))
        rule = RecommendationRule.point_mass((0,), 1, 1)
        # D * C_r1(D) with C_e1 = 1
        assert expected_cost_atomic(rule, scen, 0, 0, [1, 0]) == 1.0

    def test_deviant_moves_own_load(self):
        scen = pigou_state2(grid_m=1).with_atomic(AtomicPublicness((0.5, 0.5), (0, 0)))
        rule = RecommendationRule.point_mass((0,), 1, 1)
        assert expected_cost_atomic(rule, scen, 0, 0, [0, 1]) == 0.5 * (2 * 0.5)

    def test_stay(self):
        scen = pigou_state2(grid_m=1).with_atomic(AtomicPublicness((0.5, 0.5), (0, 0)))
        rule = RecommendationRule.point_mass((0,), 1, 1)
        assert expected_cost_atomic(rule, scen, 0, 0, [1, 0]) == 0.5

    def test_unknown_traveler(self):
        from pslab.mechanism import ScenarioError

        scen = pigou_state2(grid_m=1).with_atomic(AtomicPublicness((0.5, 0.5), (0, 0)))
        rule = RecommendationRule.point_mass((0,), 1, 1)
        with pytest.raises(ScenarioError, match="unknown traveler"):
            expected_cost_atomic(rule, scen, 7, 0, [1, 0])

    def test_consistent_with_planner_value(self, pigou, rng):
        # obedient play: summing each traveler's own cost over recommendations gives J
        pub = AtomicPublicness((0.3, 0.7), (0, 0))
        scen = pigou.with_grid(4).with_atomic(pub)
        G = len(scen.grid())
        rule = RecommendationRule.from_weights(rng.dirichlet(np.ones(G), size=2), np.arange(G)[:, None], 4)
        total = sum(expected_cost_atomic(rule, scen, i, g, scen.grid().policies[g])
                    for i in range(2) for g in range(G))
        assert total == pytest.approx(planner_value(rule, scen), abs=1e-13)

    def test_approaches_nonatomic(self, pigou, full_revelation):
        errs = []
        for n in (2, 8, 32, 128):
            scen = pigou.with_atomic(AtomicPublicness.equal_weights((1.0,), n, 1.0))
            a = expected_cost_atomic(full_revelation, scen, 0, TOP, [0, 1]) / (1.0 / n)
            errs.append(abs(a - expected_cost_nonatomic(full_revelation, pigou, 0, TOP, [0, 1])))
        assert all(x > y for x, y in zip(errs, errs[1:]))


class TestPlannerValue:
    def test_wardrop_point_mass(self):
        scen = pigou_state2(grid_m=2)
        rule = RecommendationRule.point_mass((1,), 1, 2)
        assert planner_value(rule, scen) == 1.0

    def test_expectation(self):
        # two atoms with objective 1 and 3
        scen = make_scenario(["a", "b"], [[0], [1]], ["s"], [1.0], {"a": [[1.0]], "b": [[3.0]]}, grid_m=1)
        rule = rule_of(1, 1, [[((0,), 0.5), ((1,), 0.5)]])
        assert planner_value(rule, scen) == 2.0

    def test_zero_cost_network_rejected(self):
        # an all-zero polynomial is outside the cost model, so J = 0 is unreachable
        from pslab.mechanism import ScenarioError

        with pytest.raises(ScenarioError, match="identically zero"):
            make_scenario(["a"], [[0]], ["s"], [1.0], {"a": [[0.0]]}, grid_m=1)

    def test_profile_table_matches(self, diamond, rng):
        scen = diamond.with_partition((0.3, 0.7)).with_grid(2)
        table = profile_table(scen)
        for p in rng.integers(table.num_profiles, size=10):
            prof = tuple(table.profiles[p])
            rule = RecommendationRule.point_mass(prof, 2, 2)
            assert planner_value(rule, scen) == pytest.approx(
                float(scen.network.prior @ table.objective[:, p]), abs=1e-15)
