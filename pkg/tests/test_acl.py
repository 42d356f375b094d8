import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from pslab.acl import (
    REFINEMENT_T,
    acl_value,
    check_proposition1,
    intermediate,
    loss_L,
)
from pslab.costs import EmptyConditioningError
from pslab.mechanism import RecommendationRule
from pslab.planner import solve_optimal_mechanism

from conftest import rule_of


def state_blind(grid_m, weights):
    """Same atom weights in both states of a two-state scenario."""
    atoms = [((g,), w) for g, w in weights.items()]
    return rule_of(grid_m, 1, [atoms, atoms])


class TestIntermediate:
    def test_endpoints(self):
        z, y = np.array([0.3, 0.7]), np.array([0.9, 0.1])
        assert np.array_equal(intermediate(z, y, 0.0), z)
        assert np.array_equal(intermediate(z, y, 1.0), y)

    def test_quarter(self):
        assert intermediate([1, 0], [0, 1], 0.25).tolist() == [0.75, 0.25]

    def test_bad_delta(self):
        with pytest.raises(ValueError, match="delta"):
            intermediate([1, 0], [0, 1], 1.5)

    @given(st.floats(0, 1), st.integers(0, 10), st.integers(0, 10))
    def test_on_simplex(self, d, a, b):
        z = np.array([a, 10 - a]) / 10
        y = np.array([b, 10 - b]) / 10
        p = intermediate(z, y, d)
        assert np.all(p >= 0) and p.sum() == pytest.approx(1.0, abs=1e-15)


class TestLoss:
    def test_same_policy(self, full_revelation, pigou):
        assert loss_L(0, 0, 0, full_revelation, pigou) == 0.0

    def test_full_revelation(self, full_revelation, pigou):
        # route 1 always costs 1, so switching the recommendation only moves
        # conditioning mass between two half-probability states
        assert loss_L([1, 0], [0, 1], 0, full_revelation, pigou) == 0.0
        assert loss_L([0, 1], [1, 0], 0, full_revelation, pigou) == pytest.approx(0.25, abs=1e-15)

    def test_full_revelation_gain_is_not_loss(self, full_revelation, pigou):
        # the 0.5 figure belongs to the obedience gain EC(z; z) - EC(y; z)
        from pslab.costs import expected_cost_nonatomic as ec
        assert ec(full_revelation, pigou, 0, 0, [1, 0]) - ec(full_revelation, pigou, 0, 0, [0, 1]) == 0.5

    def test_constant_mass_formula(self, constant):
        grid = constant.grid()
        w = {0: 0.5, 3: 0.3, 7: 0.2}
        rule = state_blind(constant.grid_m, w)
        cbar = float(constant.network.prior @ np.array([1.0, 2.0]))
        for z in w:
            for y in w:
                assert loss_L(z, y, 0, rule, constant) == pytest.approx(cbar * (w[z] - w[y]), abs=1e-14)
        assert grid.policies[3].sum() == 1.0

    def test_off_support(self, full_revelation, pigou):
        with pytest.raises(EmptyConditioningError, match="empty conditioning"):
            loss_L([0.5, 0.5], [1, 0], 0, full_revelation, pigou)


class TestAcl:
    def test_zero_on_diagonal(self, full_revelation, pigou):
        assert acl_value(0, 0, 0, full_revelation, pigou) == 0.0

    def test_bounded_by_direct_loss(self, pigou):
        rule = solve_optimal_mechanism(pigou.with_grid(5)).rule
        scen = pigou.with_grid(5)
        supp = sorted({p[0] for atoms in rule.atoms for p, _ in atoms})
        for z in supp:
            for y in supp:
                assert acl_value(z, y, 0, rule, scen) <= loss_L(z, y, 0, rule, scen)

    def test_refinement_monotone(self, pigou):
        scen = pigou.with_grid(8)
        w = {g: 1 / 9 for g in range(9)}
        rule = state_blind(8, w)
        for z, y in ((0, 8), (8, 0), (2, 6)):
            vals = [acl_value(z, y, 0, rule, scen, T) for T in REFINEMENT_T]
            assert all(b <= a for a, b in zip(vals, vals[1:]))

    def test_constant_telescopes(self, constant):
        w = {0: 0.1, 2: 0.2, 5: 0.3, 8: 0.15, 10: 0.25}
        rule = state_blind(constant.grid_m, w)
        for z in w:
            for y in w:
                assert acl_value(z, y, 0, rule, constant) == pytest.approx(
                    loss_L(z, y, 0, rule, constant), abs=1e-14)

    def test_short_path_rejected(self, full_revelation, pigou):
        with pytest.raises(ValueError):
            acl_value(0, 10, 0, full_revelation, pigou, max_T=1)


class TestPathLossCheck:
    def test_single_atom_vacuous(self, pigou):
        rule = RecommendationRule.point_mass((3,), 2, pigou.grid_m)
        rep = check_proposition1(rule, pigou)
        assert rep.pairs == [] and rep.passed and rep.condition_i_pass

    def test_full_revelation_flagged(self, full_revelation, pigou):
        rep = check_proposition1(full_revelation, pigou)
        assert not rep.direct_pass and not rep.passed
        assert rep.agrees_with_direct

    def test_report_dict(self, full_revelation, pigou):
        d = check_proposition1(full_revelation, pigou).to_dict(pigou.grid())
        assert d["pairs_checked"] == 2 and d["worst_pairs"][0]["z"] in ([1.0, 0.0], [0.0, 1.0])

    def test_obedient_multi_atom_residual(self, pigou):
        # condition (ii) is not met by obedient rules whose atoms sit in
        # different states: L compares unnormalized conditional costs, so the
        # residual is the gap in marginal-weighted costs, not a path-grid error
        scen = pigou.with_grid(5)
        rule = solve_optimal_mechanism(scen).rule
        rep = check_proposition1(rule, scen)
        assert rep.direct_pass
        assert rep.condition_ii_max_residual > 1e-3
        assert not rep.agrees_with_direct


@settings(max_examples=25, deadline=None)
@given(st.lists(st.floats(0.01, 1.0), min_size=3, max_size=3))
def test_constant_acl_equals_direct_loss(ws):
    from pslab import corpus
    scen = corpus.scenario("constant").with_grid(4)
    w = dict(zip((0, 2, 4), np.asarray(ws) / sum(ws)))
    rule = state_blind(4, w)
    for z in w:
        for y in w:
            assert acl_value(z, y, 0, rule, scen, 9) == pytest.approx(loss_L(z, y, 0, rule, scen), abs=1e-13)


def test_constant_cost_condition_ii_counterexample(constant):
    # every rule is obedient under constant costs, yet ACL(z, y) = M(z) - M(y)
    # while the target is M(y) - M(z); condition (ii) misses by 2 |M(z) - M(y)|
    w = {0: 0.7, 10: 0.3}
    rule = state_blind(constant.grid_m, w)
    cbar = float(constant.network.prior @ np.array([1.0, 2.0]))
    rep = check_proposition1(rule, constant)
    assert rep.direct_pass and rep.condition_i_pass
    assert rep.condition_ii_max_residual == pytest.approx(2 * cbar * 0.4, abs=1e-14)
    assert not rep.agrees_with_direct
