import math

import numpy as np
import pytest

from rmdo import ConfigError, build_game
from rmdo.engine import (Engine, LogCadence, Schedule, StopCondition, adado_early_stop, adaptive_frequency,
                         next_check, stochastic_adaptive_frequency, xdo_should_expand, xdo_threshold)
from rmdo.evaluation import exploitability
from rmdo.regret import regret_matching_table
from rmdo.restricted import RestrictedStats, WarmStartMode

NO_EVAL = LogCadence(mode="iterations", every=10**9, exploitability=False)


def stats(A=2, S=10, H=3):
    return RestrictedStats(sum_infosets=S, max_branching=A, horizon=H)


class TestFrequencies:
    @pytest.mark.parametrize("schedule,st,eps,expect", [
        (Schedule("xodo"), stats(), None, 1),
        (Schedule("pdo", c=100), stats(), None, 100),
        (Schedule("spdo", c=7), stats(), None, 7),
        (Schedule("adado"), stats(4, 50), 0.01, 10000),
        (Schedule("adado", alpha=0.1), stats(4, 50), 0.01, 1000),
        (Schedule("adado", alpha=0.001), stats(1, 3), 1.0, 1),
        (Schedule("sado"), stats(4, 100, 4), 0.1, 10000),
        (Schedule("sado", target_eps=0.1), stats(4, 100, 4), 5.0, 10000),
        (Schedule("xdo"), stats(), None, None),
        (Schedule("none"), stats(), None, None),
    ])
    def test_next_check(self, schedule, st, eps, expect):
        assert next_check(schedule, st, eps) == expect

    def test_formulas(self):
        assert adaptive_frequency(4, 50, 0.01) == pytest.approx(10000)
        assert stochastic_adaptive_frequency(4, 100, 4, 0.1) == pytest.approx(10000)

    def test_ceiling(self):
        assert next_check(Schedule("adado"), stats(2, 10), 3.0) == math.ceil(math.sqrt(2) * 10 / 3)

    def test_adaptive_needs_target(self):
        with pytest.raises(ConfigError):
            next_check(Schedule("adado"), stats())

    def test_xdo_thresholds(self):
        assert xdo_threshold(0.5, 0) == 0.5 and xdo_threshold(0.5, 3) == 0.0625
        assert not xdo_should_expand(0.7, 0.5, 0)
        assert xdo_should_expand(0.5, 0.5, 0) and not xdo_should_expand(0.3, 0.5, 1)

    def test_early_stop(self):
        assert adado_early_stop(0.099, 0.10, 0.01)
        assert not adado_early_stop(0.3, 0.5, 0.01)
        assert not adado_early_stop(0.1, None, 0.01)

    @pytest.mark.parametrize("kw", [dict(kind="foo"), dict(c=0), dict(c=1.5), dict(alpha=0.0), dict(alpha=1.5),
                                    dict(eps0=0), dict(target_eps=-1.0), dict(early_stop_tol=0.0),
                                    dict(check_every=True)])
    def test_schedule_validation(self, kw):
        with pytest.raises(ConfigError):
            Schedule(**kw)


class TestEngineSetup:
    def test_stochastic_needs_mccfr(self, kuhn):
        with pytest.raises(ConfigError, match="mccfr"):
            Engine(kuhn, Schedule("sado", target_eps=0.1), "cfr")
        with pytest.raises(ConfigError):
            Engine(kuhn, Schedule("spdo"), "lcfr")

    def test_adaptive_needs_target(self, kuhn):
        with pytest.raises(ConfigError):
            Engine(kuhn, Schedule("adado"))
        Engine(kuhn, Schedule("adado"), target_eps=1e-3)

    def test_unknown_solver(self, kuhn):
        with pytest.raises(ConfigError):
            Engine(kuhn, Schedule("pdo"), "dcfr")

    def test_initial_charges(self, kuhn):
        e = Engine(kuhn, Schedule("pdo"))
        assert e.counter.best_response == 2 * 58 and e.counter.regret_min == 0
        assert e.log.events[0].event == "window" and e.log.events[0].charged_to == "evaluation"
        s = Engine(kuhn, Schedule("sado", target_eps=0.1), "mccfr")
        assert s.counter.best_response > 2 * 58 and s.log.events[0].charged_to == "best_response"

    def test_stop_needs_something(self):
        with pytest.raises(ConfigError):
            StopCondition()

    def test_target_needs_logging(self, kuhn):
        with pytest.raises(ConfigError):
            Engine(kuhn, Schedule("pdo")).run(StopCondition(target_exploitability=0.1), NO_EVAL)


def windows(log):
    return [ev for ev in log.events if ev.event == "br_check"]


class TestRuns:
    def test_pdo_converges_on_kuhn(self, kuhn):
        e = Engine(kuhn, Schedule("pdo", c=100))
        pol, log = e.run(StopCondition(node_budget=10**7, target_exploitability=1e-3))
        assert exploitability(kuhn, pol) < 1e-3
        assert log.stop_reason == "target_exploitability"

    @pytest.mark.parametrize("sched,solver", [
        (Schedule("xodo"), "cfr"), (Schedule("pdo", c=20), "lcfr"), (Schedule("xdo", eps0=0.5, check_every=5), "cfr"),
        (Schedule("adado", alpha=0.01, target_eps=1e-3, early_stop_tol=1e-3, early_stop_every=20), "cfr"),
        (Schedule("spdo", c=50), "mccfr"), (Schedule("sado", target_eps=0.5), "mccfr"),
    ])
    def test_window_soundness_and_nesting(self, leduc, sched, solver):
        e = Engine(leduc, sched, solver, seed=3, track_oas=True)
        _, log = e.run(StopCondition(max_iterations=400), LogCadence(mode="iterations", every=50, oas=True))
        checks = windows(log)
        # j increments exactly at changing checks
        assert e.j == sum(1 for c in checks if c.changed)
        js = [r.window_j for r in log.records]
        assert js == sorted(js)
        # populations form a strictly increasing chain, one entry per window
        assert len(log.populations) == e.j + 1
        assert all(a < b for a, b in zip(log.populations, log.populations[1:]))
        # k <= X <= |S|
        assert e.j + 1 <= e.stats.sum_infosets <= e.tree.n_infosets
        nodes = [r.nodes_reported for r in log.records]
        assert nodes == sorted(nodes)
        for r in log.records:
            assert r.nodes_reported == r.nodes_rm + r.nodes_br

    def test_xodo_checks_every_iteration(self, kuhn):
        e = Engine(kuhn, Schedule("xodo"))
        e.run(StopCondition(max_iterations=25), NO_EVAL)
        assert len(windows(e.log)) == 25

    def test_pdo_checks_every_c_within_window(self, kuhn):
        e = Engine(kuhn, Schedule("pdo", c=10))
        e.run(StopCondition(max_iterations=200), NO_EVAL)
        starts = {0}
        for ev in e.log.events:
            if ev.event == "br_check":
                # checks land c iterations after the last window start
                assert (ev.iteration - max(s for s in starts if s < ev.iteration)) % 10 == 0
                if ev.changed:
                    starts.add(ev.iteration)

    def test_xdo_thresholds_logged(self, kuhn):
        e = Engine(kuhn, Schedule("xdo", eps0=0.5, check_every=5))
        e.run(StopCondition(max_iterations=2000), NO_EVAL)
        locals_ = [ev for ev in e.log.events if ev.event == "xdo_local"]
        assert locals_
        for ev in locals_:
            assert ev.threshold == 0.5 / 2 ** ev.window_j
            assert ev.charged_to == "best_response" and ev.charged > 0
        for ev in windows(e.log):
            prior = [x for x in locals_ if x.iteration == ev.iteration]
            assert prior and prior[0].local_exploitability <= ev.threshold

    def test_adado_early_stop_fires(self, kuhn):
        sched = Schedule("adado", target_eps=1e-6, early_stop_tol=1e-2, early_stop_every=10)
        e = Engine(kuhn, sched, target_eps=1e-6)
        assert e.m > 10**5
        e.run(StopCondition(max_iterations=300), NO_EVAL)
        checks = [ev for ev in e.log.events if ev.event == "early_stop_check"]
        assert windows(e.log), "the plateau test should trigger a check long before m"
        # the first check in every window never triggers
        first = {}
        for ev in checks:
            first.setdefault(ev.window_j, ev)
        for ev in first.values():
            assert not any(w.iteration == ev.iteration for w in windows(e.log))

    def test_oas_equals_las_in_single_window(self, kuhn):
        e = Engine(kuhn, Schedule("pdo", c=10**6), track_oas=True)
        e.run(StopCondition(max_iterations=50), NO_EVAL)
        assert e.j == 0
        assert np.array_equal(e.oas_policy(), e.las_policy())

    def test_oas_accumulates_across_windows(self, kuhn):
        e = Engine(kuhn, Schedule("xodo"), warm=WarmStartMode("reset"), track_oas=True)
        e.run(StopCondition(max_iterations=30), NO_EVAL)
        assert e.j >= 1
        assert e.oas_sum.sum() > e.profile.strategy_sum.sum()
        assert not np.array_equal(e.oas_policy(), e.las_policy())

    def test_oas_requires_tracking(self, kuhn):
        with pytest.raises(ConfigError):
            Engine(kuhn, Schedule("pdo")).oas_policy()

    def test_baseline_runs_full_game(self, kuhn):
        e = Engine(kuhn, Schedule("none"), "lcfr")
        e.run(StopCondition(max_iterations=10), NO_EVAL)
        assert e.counter.best_response == 0 and e.counter.regret_min == 10 * 2 * 58
        assert e.stats.sum_infosets == 12


class TestContracts:
    @pytest.mark.parametrize("sched,solver", [(Schedule("pdo", c=20), "cfr"), (Schedule("spdo", c=20), "mccfr")])
    def test_logging_does_not_change_abscissa(self, leduc, sched, solver):
        runs = []
        for cad in (LogCadence(mode="iterations", every=7), NO_EVAL):
            e = Engine(leduc, sched, solver, seed=9)
            e.run(StopCondition(max_iterations=150), cad)
            runs.append(e)
        a, b = runs
        assert a.counter.reported == b.counter.reported
        assert a.counter.evaluation > b.counter.evaluation
        assert np.array_equal(a.profile.regrets, b.profile.regrets)

    def test_deterministic(self, leduc):
        logs = []
        for _ in range(2):
            e = Engine(leduc, Schedule("spdo", c=30), "mccfr", seed=4)
            _, log = e.run(StopCondition(max_iterations=300), LogCadence(mode="iterations", every=50))
            logs.append(log)
        assert logs[0].records == logs[1].records and logs[0].events == logs[1].events

    def test_seed_matters_for_mccfr(self, kuhn):
        out = []
        for seed in (1, 2):
            e = Engine(kuhn, Schedule("spdo", c=30), "mccfr", seed=seed)
            e.run(StopCondition(max_iterations=100), NO_EVAL)
            out.append(e.profile.regrets)
        assert not np.array_equal(*out)

    def test_warm_start_continuity(self, leduc):
        e = Engine(leduc, Schedule("pdo", c=25), warm=WarmStartMode("carry"))
        t = e.tree
        while True:
            e.t += 1
            e.t_window += 1
            e._iterate()
            prev_mask = e.population.mask.copy()
            before = regret_matching_table(t, e.profile.regrets, prev_mask)
            if e.t_window % e.m == 0 and e.check():
                break
            assert e.t < 1000
        after = regret_matching_table(t, e.profile.regrets, e.population.mask)
        new = e.population.mask & ~prev_mask
        touched = np.isin(t.slot_infoset, t.slot_infoset[new])
        old = prev_mask & ~touched
        assert np.array_equal(after[old], before[old])
        # where actions joined, the old actions keep their relative weights
        for iid in np.unique(t.slot_infoset[new]):
            o, n = t.slot_offset[iid], t.slot_offset[iid + 1]
            keep = prev_mask[o:n] & (before[o:n] > 0)
            if keep.sum() >= 2 and after[o:n][keep].sum() > 0:
                assert np.allclose(after[o:n][keep] / after[o:n][keep].sum(), before[o:n][keep], rtol=1e-9)

    def test_carry_copies_regrets_bitwise(self, kuhn):
        e = Engine(kuhn, Schedule("pdo", c=30), warm=WarmStartMode("carry", 1e-6))
        while True:
            prev = e.profile.copy()
            prev_mask = e.population.mask.copy()
            j = e.j
            e.t += 1
            e.t_window += 1
            e._iterate()
            snap = e.profile.copy()
            if e.t_window % e.m == 0 and e.check():
                break
            assert e.t < 3000
        added_mask = e.population.mask & ~prev_mask
        assert np.array_equal(e.profile.regrets[prev_mask], snap.regrets[prev_mask])
        assert np.all(e.profile.regrets[added_mask] == 1e-6)
        assert np.array_equal(e.profile.strategy_sum[prev_mask], snap.strategy_sum[prev_mask])
        assert e.j == j + 1 and prev.iteration + 1 == e.profile.iteration

    def test_reset_restarts_linear_weights(self, kuhn):
        e = Engine(kuhn, Schedule("pdo", c=10), "lcfr", warm=WarmStartMode("reset"))
        while e.j == 0:
            e.step()
        assert e.profile.iteration == 0 and not e.profile.regrets.any()


class TestSnapshots:
    @pytest.mark.parametrize("sched,solver", [(Schedule("pdo", c=15), "lcfr"), (Schedule("spdo", c=15), "mccfr")])
    def test_resume_matches_uninterrupted(self, tmp_path, leduc, sched, solver):
        full = Engine(leduc, sched, solver, seed=5, track_oas=True)
        for _ in range(120):
            full.step()
        part = Engine(leduc, sched, solver, seed=5, track_oas=True)
        for _ in range(70):
            part.step()
        path = part.save_snapshot(tmp_path / "snap.npz")
        resumed = Engine(leduc, sched, solver, seed=5, track_oas=True).load_snapshot(path)
        for _ in range(50):
            resumed.step()
        assert resumed.t == full.t and resumed.j == full.j
        assert resumed.counter == full.counter
        assert np.array_equal(resumed.profile.regrets, full.profile.regrets)
        assert np.array_equal(resumed.profile.strategy_sum, full.profile.strategy_sum)
        assert np.array_equal(resumed.oas_sum, full.oas_sum)
        assert resumed.population == full.population

    def test_wrong_game_rejected(self, tmp_path, kuhn):
        path = Engine(kuhn, Schedule("pdo")).save_snapshot(tmp_path / "s.npz")
        other = build_game("kuhn", cards=4)
        with pytest.raises(ConfigError):
            Engine(other, Schedule("pdo")).load_snapshot(path)
