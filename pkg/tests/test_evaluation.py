from fractions import Fraction

import numpy as np
import pytest

from oracles import (KUHN_VALUE, MATRIX_P1, MATRIX_P2, MATRIX_VALUE, MatrixGame, kuhn_br_by_enumeration,
                     kuhn_equilibrium, kuhn_policy_to_slots, kuhn_random_behaviour, kuhn_uniform_rollouts,
                     kuhn_value)
from rmdo import ContractError, NodeCounter, Player
from rmdo.evaluation import best_response, exploitability, expected_value, support_metrics
from rmdo.restricted import Population, RestrictedView


def uniform(tree):
    return 1.0 / tree.infoset_num_actions[tree.slot_infoset]


class TestBestResponse:
    def test_matches_enumeration_on_random_policies(self, kuhn):
        rng = np.random.default_rng(7)
        for _ in range(50):
            bet1, bet2 = kuhn_random_behaviour(rng)
            pol = kuhn_policy_to_slots(kuhn.tree, bet1, bet2)
            assert best_response(kuhn, pol, 0).value == pytest.approx(kuhn_br_by_enumeration(bet2, 0), abs=1e-12)
            assert best_response(kuhn, pol, 1).value == pytest.approx(kuhn_br_by_enumeration(bet1, 1), abs=1e-12)

    def test_value_dominates_on_policy(self, kuhn):
        rng = np.random.default_rng(8)
        for _ in range(20):
            pol = kuhn_policy_to_slots(kuhn.tree, *kuhn_random_behaviour(rng))
            for p in (0, 1):
                assert best_response(kuhn, pol, p).value >= expected_value(kuhn, pol, p) - 1e-12

    def test_is_pure_and_deterministic(self, leduc):
        t = leduc.tree
        rng = np.random.default_rng(1)
        pol = rng.random(t.n_slots)
        pol /= np.add.reduceat(pol, t.slot_offset[:-1])[t.slot_infoset]
        a, b = best_response(leduc, pol, 1), best_response(leduc, pol, 1)
        assert np.array_equal(a.policy, b.policy)
        sums = np.add.reduceat(a.policy, t.slot_offset[:-1])
        mine = t.infoset_player == 1
        assert set(np.unique(sums[mine])) <= {0.0, 1.0} and np.all(sums[~mine] == 0)
        assert set(np.unique(a.policy)) <= {0.0, 1.0}

    def test_br_policy_attains_value(self, leduc):
        t = leduc.tree
        u = uniform(t)
        br = best_response(leduc, u, 0)
        joint = np.where(t.infoset_player[t.slot_infoset] == 0, br.policy, u)
        # unreached P1 states get a zero row from the BR; fill them so the profile is complete
        rows = np.add.reduceat(joint, t.slot_offset[:-1])[t.slot_infoset]
        joint = np.where(rows == 0, u, joint)
        assert expected_value(leduc, joint, 0) == pytest.approx(br.value, abs=1e-12)

    def test_ties_go_to_lowest_action(self):
        g = MatrixGame(((1.0, 1.0), (1.0, 1.0)))
        br = best_response(g, uniform(g.tree), 0)
        assert br.actions(g.tree) == {0: 0}

    def test_counter_category(self, kuhn):
        c = NodeCounter()
        best_response(kuhn, uniform(kuhn.tree), 0, c)
        assert (c.best_response, c.regret_min, c.evaluation) == (58, 0, 0)

    def test_restricted_view_only_uses_allowed_actions(self, kuhn):
        t = kuhn.tree
        pop = Population.from_policies(t, (t.slot_action == 0).astype(float))
        br = best_response(RestrictedView(kuhn, pop), pop.mask.astype(float), 0)
        assert np.all(br.policy[~pop.mask] == 0)
        # everyone passes: the higher card wins the ante
        assert br.value == pytest.approx(0.0)

    def test_incomplete_opponent_rejected(self, kuhn):
        pol = uniform(kuhn.tree).copy()
        iid = kuhn.tree.infoset_of((1, b"Q|0"))
        pol[kuhn.tree.slot(iid, 0)] = 0.0
        with pytest.raises(ContractError, match="incomplete"):
            best_response(kuhn, pol, 0)
        # the responder's own rows are irrelevant
        best_response(kuhn, pol, 1)


class TestValues:
    def test_uniform_kuhn_against_rollouts(self, kuhn):
        v = expected_value(kuhn, uniform(kuhn.tree), Player.P1)
        mean, se = kuhn_uniform_rollouts(1_000_000)
        assert abs(v - mean) <= 3 * se
        assert v == pytest.approx(0.125, abs=1e-12)

    def test_zero_sum(self, leduc):
        rng = np.random.default_rng(2)
        t = leduc.tree
        pol = rng.random(t.n_slots)
        pol /= np.add.reduceat(pol, t.slot_offset[:-1])[t.slot_infoset]
        assert expected_value(leduc, pol, 0) + expected_value(leduc, pol, 1) == pytest.approx(0, abs=1e-12)

    def test_matches_rules_oracle(self, kuhn):
        rng = np.random.default_rng(3)
        for _ in range(20):
            bet1, bet2 = kuhn_random_behaviour(rng)
            pol = kuhn_policy_to_slots(kuhn.tree, bet1, bet2)
            assert expected_value(kuhn, pol, 0) == pytest.approx(kuhn_value(bet1, bet2), abs=1e-12)

    def test_charges_evaluation(self, kuhn):
        c = NodeCounter()
        expected_value(kuhn, uniform(kuhn.tree), 0, c)
        assert c.evaluation == 58 and c.reported == 0


class TestExploitability:
    @pytest.mark.parametrize("alpha", [0.0, 1 / 6, 1 / 3])
    def test_kuhn_equilibrium_family(self, kuhn, alpha):
        bet1, bet2 = kuhn_equilibrium(alpha)
        pol = kuhn_policy_to_slots(kuhn.tree, bet1, bet2)
        assert abs(exploitability(kuhn, pol)) <= 1e-9
        assert expected_value(kuhn, pol, 0) == pytest.approx(float(KUHN_VALUE), abs=1e-12)
        assert kuhn_br_by_enumeration(bet2, 0) == pytest.approx(float(KUHN_VALUE), abs=1e-12)

    def test_uniform_kuhn(self, kuhn):
        bet = {(c, s): 0.5 for c in range(3) for s in ("", "0.1")}
        bet2 = {(c, s): 0.5 for c in range(3) for s in ("0", "1")}
        expect = kuhn_br_by_enumeration(bet2, 0) + kuhn_br_by_enumeration(bet, 1)
        e = exploitability(kuhn, uniform(kuhn.tree))
        assert e > 0 and e == pytest.approx(expect, abs=1e-12)
        assert e == pytest.approx(11 / 12, abs=1e-12)
        assert exploitability(kuhn, uniform(kuhn.tree), halved=True) == pytest.approx(e / 2)

    def test_matrix_game_solution(self):
        g = MatrixGame()
        t = g.tree
        pol = np.array([float(MATRIX_P1[0]), float(MATRIX_P1[1]), float(MATRIX_P2[0]), float(MATRIX_P2[1])])
        assert abs(exploitability(g, pol)) <= 1e-12
        assert Fraction(expected_value(g, pol, 0)).limit_denominator(100) == MATRIX_VALUE
        assert t.n_slots == 4

    def test_single_action_game_is_zero(self):
        g = MatrixGame(((3.0,),))
        assert exploitability(g, np.ones(2)) == 0.0
        assert expected_value(g, np.ones(2), 0) == 3.0

    def test_nonnegative_on_random_profiles(self, small_leduc):
        t = small_leduc.tree
        rng = np.random.default_rng(4)
        for _ in range(10):
            pol = rng.random(t.n_slots) ** 3
            pol /= np.add.reduceat(pol, t.slot_offset[:-1])[t.slot_infoset]
            assert exploitability(small_leduc, pol) >= -1e-9

    def test_leaves_other_categories_alone(self, kuhn):
        c = NodeCounter()
        exploitability(kuhn, uniform(kuhn.tree), c)
        assert c.evaluation == 116 and c.reported == 0


class TestSupport:
    def test_fully_mixed(self, kuhn):
        r = support_metrics(uniform(kuhn.tree), kuhn)
        assert (r.min_pct, r.avg_pct, r.mean_ratio, r.degenerate) == (1.0, 1.0, 1.0, False)

    def test_one_pure_of_two(self):
        g = MatrixGame()
        r = support_metrics(np.array([1.0, 0.0, 0.5, 0.5]), g)
        assert (r.min_pct, r.avg_pct) == (0.5, 0.75)
        assert r.per_infostate == {(0, b"row"): 1, (1, b"col"): 2}

    def test_action_weighted_average_differs_from_mean_ratio(self):
        g = MatrixGame(((1.0, 0.0, 0.0, 0.0), (0.0, 1.0, 0.0, 0.0)))
        # P1 (2 actions) pure, P2 (4 actions) fully mixed
        r = support_metrics(np.array([1.0, 0.0, 0.25, 0.25, 0.25, 0.25]), g)
        assert r.avg_pct == pytest.approx(5 / 6) and r.mean_ratio == pytest.approx(0.75)
        assert r.min_pct <= r.avg_pct

    def test_threshold_one_is_degenerate(self, kuhn):
        r = support_metrics(uniform(kuhn.tree), kuhn, threshold=1.0)
        assert r.min_pct == 0.0 and r.avg_pct == 0.0 and r.degenerate

    def test_threshold_cuts_small_mass(self):
        g = MatrixGame()
        pol = np.array([1 - 1e-12, 1e-12, 0.5, 0.5])
        assert support_metrics(pol, g).per_infostate[(0, b"row")] == 1
        assert support_metrics(pol, g, threshold=0.0).per_infostate[(0, b"row")] == 2

    def test_negative_threshold(self, kuhn):
        with pytest.raises(ContractError):
            support_metrics(uniform(kuhn.tree), kuhn, threshold=-1)
