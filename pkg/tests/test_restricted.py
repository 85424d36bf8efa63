import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from oracles import brute_reachable
from rmdo import ContractError, InfoStateKey, NodeCounter, Player, StructuralError, build_game
from rmdo.evaluation import best_response
from rmdo.regret import TabularProfile, cfr_iteration
from rmdo.restricted import (Population, RestrictedView, WarmStartMode, added_slots, expand,
                             initial_population, restricted_stats, warm_start)


def uniform(tree):
    return 1.0 / tree.infoset_num_actions[tree.slot_infoset]


def pure(tree, player, action=0):
    """A pure policy for ``player`` playing ``action`` (clipped to the legal range) everywhere."""
    pol = np.zeros(tree.n_slots)
    for iid in np.flatnonzero(tree.infoset_player == player):
        pol[tree.slot(iid, min(action, int(tree.infoset_num_actions[iid]) - 1))] = 1.0
    return pol


class TestPopulation:
    def test_initial_kuhn(self, kuhn):
        c = NodeCounter()
        pop = initial_population(kuhn, c)
        assert len(pop) == 12 and pop.size == 12
        assert all(len(acts) == 1 for _, acts in pop.items())
        assert c.best_response == 2 * 58 and c.regret_min == 0
        assert initial_population(kuhn) == pop

    def test_text_round_trip(self, leduc):
        pop = initial_population(leduc)
        text = pop.to_text()
        assert text.startswith("# rmdo population v1\n")
        assert Population.from_text(leduc.tree, text) == pop

    def test_binary_keys_round_trip(self):
        g = build_game("oshi_zumo", coins=2)
        pop = Population.full(g.tree)
        assert Population.from_text(g.tree, pop.to_text()) == pop

    @pytest.mark.parametrize("line", ["P1\tJ|\t5", "P1\tX|\t0", "P1 J| 0"])
    def test_bad_text(self, kuhn, line):
        with pytest.raises(ContractError, match="line 2"):
            Population.from_text(kuhn.tree, "# header\n" + line + "\n")

    def test_allowed_subset_of_legal(self, leduc):
        pop = initial_population(leduc)
        for key, acts in pop.items():
            iid = leduc.tree.infoset_of(key)
            assert acts and set(acts) <= set(range(int(leduc.tree.infoset_num_actions[iid])))

    def test_mask_shape_checked(self, kuhn):
        with pytest.raises(ContractError):
            Population(kuhn.tree, np.ones(3, dtype=bool))


class TestExpand:
    def test_fixed_point(self, kuhn):
        pop = initial_population(kuhn)
        br = [best_response(kuhn, uniform(kuhn.tree), p) for p in (0, 1)]
        new, changed, added = expand(pop, *br)
        assert new is pop and not changed and added == []

    def test_single_addition(self, kuhn):
        t = kuhn.tree
        base = pure(t, 0) + pure(t, 1)
        pop = Population.from_policies(t, base)
        br1 = pure(t, 0)
        iid = t.infoset_of((0, b"K|"))
        br1[t.slot(iid, 0)], br1[t.slot(iid, 1)] = 0.0, 1.0
        new, changed, added = expand(pop, br1, pure(t, 1))
        assert changed and added == [(InfoStateKey(Player.P1, b"K|"), 1)]
        assert new.size == pop.size + 1 and pop <= new

    def test_chain_strictly_grows(self, leduc):
        # repeated CFR + best response: every change strictly grows the population
        t = leduc.tree
        pop = initial_population(leduc)
        prof = TabularProfile.zeros(t)
        sizes = [pop.size]
        for _ in range(6):
            view = RestrictedView(leduc, pop)
            for _ in range(5):
                cfr_iteration(view, prof)
            avg = prof.average(t, pop.mask)
            br = [best_response(leduc, avg, p) for p in (0, 1)]
            new, changed, added = expand(pop, *br)
            assert changed == bool(added)
            if changed:
                assert pop <= new and new.size == pop.size + len(added) > pop.size
            pop = new
            sizes.append(pop.size)
        assert sizes == sorted(sizes) and sizes[-1] > sizes[0]


class TestRestrictedView:
    def test_legal_actions_intersect(self, kuhn):
        t = kuhn.tree
        pop = Population.from_policies(t, pure(t, 0, 1), pure(t, 1, 0))
        view = RestrictedView(kuhn, pop)
        h = view.history((0, 1))
        assert view.legal_actions(h) == [1]
        assert view.legal_actions(view.root) == [0, 1, 2]
        with pytest.raises(StructuralError):
            view.history((0, 1, 0))

    @settings(max_examples=20, deadline=None)
    @given(st.data())
    def test_enumeration_matches_brute_force(self, data):
        game = build_game("kuhn")
        t = game.tree
        mask = np.array(data.draw(st.lists(st.booleans(), min_size=t.n_slots, max_size=t.n_slots)))
        view = RestrictedView(game, Population(t, mask))
        expect = brute_reachable(game, lambda key, a: bool(mask[t.slot(t.infoset_of(key), a)]))
        assert sum(1 for _ in view.histories()) == expect == int(view.inside.sum())
        keys = {view.infostate_key(h) for h in view.histories() if h.owner in (Player.P1, Player.P2)}
        assert len(keys) == view.num_infostates(Player.P1) + view.num_infostates(Player.P2)

    def test_excluded_infostates(self, kuhn):
        t = kuhn.tree
        pop = Population.from_policies(t, pure(t, 0, 1), pure(t, 1, 0))
        view = RestrictedView(kuhn, pop)
        # P1 always bets: P2 only faces bets and P1 never reaches its second decision
        assert view.num_infostates(Player.P1) == 3 and view.num_infostates(Player.P2) == 3

    def test_foreign_population(self, kuhn, leduc):
        with pytest.raises(ContractError):
            RestrictedView(kuhn, initial_population(leduc))


class TestWarmStart:
    def _setup(self, kuhn):
        t = kuhn.tree
        pop = initial_population(kuhn)
        prof = TabularProfile.zeros(t)
        for _ in range(3):
            cfr_iteration(RestrictedView(kuhn, pop), prof)
        iid = t.infoset_of((0, b"J|"))
        free = next(a for a in range(2) if not pop.mask[t.slot(iid, a)])
        return t, pop, prof, [(t.info_key(iid), free)]

    def test_carry_exact(self, kuhn):
        t, pop, prof, added = self._setup(kuhn)
        prof.regrets[pop.mask] = np.arange(pop.size) + 2.5
        out = warm_start(prof, pop.mask, added, WarmStartMode("carry", 1e-6), t)
        slots = added_slots(t, added)
        old = pop.mask
        assert np.array_equal(out.regrets[old], prof.regrets[old])
        assert np.array_equal(out.strategy_sum[old], prof.strategy_sum[old])
        assert out.regrets[slots].tolist() == [1e-6] and out.strategy_sum[slots].tolist() == [1e-6]
        assert out.regrets is not prof.regrets and out.iteration == prof.iteration

    def test_carry_without_strategy(self, kuhn):
        t, pop, prof, added = self._setup(kuhn)
        out = warm_start(prof, pop.mask, added, WarmStartMode("carry", 1e-6, carry_strategy=False), t)
        assert not out.strategy_sum.any()
        assert np.array_equal(out.regrets[pop.mask], prof.regrets[pop.mask])

    def test_reset(self, kuhn):
        t, pop, prof, added = self._setup(kuhn)
        out = warm_start(prof, pop.mask, added, WarmStartMode("reset"), t)
        assert not out.regrets.any() and not out.strategy_sum.any() and out.iteration == 0

    def test_no_additions_is_identity(self, kuhn):
        t, pop, prof, _ = self._setup(kuhn)
        out = warm_start(prof, pop.mask, [], WarmStartMode("carry"), t)
        assert np.array_equal(out.regrets, prof.regrets) and np.array_equal(out.strategy_sum, prof.strategy_sum)

    def test_readding_old_pair_rejected(self, kuhn):
        t, pop, prof, _ = self._setup(kuhn)
        key, acts = next(pop.items())
        with pytest.raises(ContractError):
            warm_start(prof, pop.mask, [(key, acts[0])], WarmStartMode("carry"), t)

    def test_worked_example(self, kuhn):
        t = kuhn.tree
        iid = t.infoset_of((0, b"Q|"))
        mask = np.zeros(t.n_slots, dtype=bool)
        mask[t.slot(iid, 0)] = True
        prof = TabularProfile.zeros(t)
        prof.regrets[t.slot(iid, 0)] = 2.5
        out = warm_start(prof, mask, [(t.info_key(iid), 1)], WarmStartMode("carry", 1e-6), t)
        assert out.regrets[t.slot(iid, 0)] == 2.5 and out.regrets[t.slot(iid, 1)] == 1e-6

    @pytest.mark.parametrize("kind,eps", [("copy", 1e-6), ("carry", 0.0), ("carry", -1.0)])
    def test_mode_validation(self, kind, eps):
        with pytest.raises(ContractError):
            WarmStartMode(kind, eps)


class TestStats:
    def test_full_kuhn(self, kuhn):
        s = restricted_stats(RestrictedView(kuhn, Population.full(kuhn.tree)))
        assert (s.sum_infosets, s.max_branching, s.horizon) == (12, 2, 3)

    def test_initial_kuhn(self, kuhn):
        c = NodeCounter()
        view = RestrictedView(kuhn, initial_population(kuhn))
        s = restricted_stats(view, c, window=1)
        assert s.max_branching == 1 and s.window == 1
        assert s.sum_infosets == sum(view.num_infostates(p) for p in (Player.P1, Player.P2))
        assert c.evaluation == int(view.inside.sum()) and c.reported == 0

    def test_large_kuhn_branching(self, large_kuhn):
        s = restricted_stats(RestrictedView(large_kuhn, Population.full(large_kuhn.tree)))
        assert s.max_branching == 40 and s.sum_infosets == 240

    def test_monotone_under_expansion(self, leduc):
        t = leduc.tree
        pop = initial_population(leduc)
        prev = restricted_stats(RestrictedView(leduc, pop))
        rng = np.random.default_rng(0)
        for _ in range(5):
            extra = Population(t, pop.mask | (rng.random(t.n_slots) < 0.05))
            s = restricted_stats(RestrictedView(leduc, extra))
            assert s.sum_infosets >= prev.sum_infosets and s.max_branching >= prev.max_branching
            assert s.sum_infosets <= t.n_infosets
            pop, prev = extra, s

    def test_empty_population(self, kuhn):
        with pytest.raises(ContractError):
            restricted_stats(RestrictedView(kuhn, Population.empty(kuhn.tree)))
