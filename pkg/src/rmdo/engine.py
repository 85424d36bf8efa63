"""Regret-minimizing double oracle: windows, frequency schedules and the run loop."""

from __future__ import annotations

import json
import logging
import math
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .core import ConfigError, GameTree, NodeCounter, Tree
from .evaluation import best_response, exploitability
from .regret import SamplerParams, TabularProfile, average_policy, cfr_iteration, mccfr_episode
from .restricted import (Population, RestrictedStats, RestrictedView, WarmStartMode, expand,
                         initial_population, restricted_stats, warm_start)

log = logging.getLogger(__name__)

SCHEDULES = ("none", "xodo", "xdo", "pdo", "adado", "spdo", "sado")
SOLVERS = ("cfr", "lcfr", "mccfr")
STOCHASTIC = ("spdo", "sado")
SNAPSHOT_VERSION = 1


@dataclass(frozen=True)
class Schedule:
    """When to compute best responses.

    ``none`` runs the regret minimizer on the full game (baseline). ``xodo``
    checks every iteration, ``pdo``/``spdo`` every ``c`` iterations, ``xdo``
    whenever the local exploitability reaches ``eps0 / 2**j``, ``adado`` and
    ``sado`` after an adaptive number of iterations derived from the current
    restricted game, optionally cut short by the plateau test.
    """

    kind: str = "pdo"
    c: int = 100
    eps0: float = 0.5
    check_every: int = 10
    target_eps: float | None = None
    alpha: float = 1.0
    early_stop_tol: float | None = None
    early_stop_every: int = 100

    def __post_init__(self) -> None:
        if self.kind not in SCHEDULES:
            raise ConfigError(f"unknown schedule {self.kind!r}; choose from {SCHEDULES}")
        for name in ("c", "check_every", "early_stop_every"):
            v = getattr(self, name)
            if isinstance(v, bool) or not isinstance(v, int) or v < 1:
                raise ConfigError(f"schedule.{name} must be a positive integer, got {v!r}")
        if not self.eps0 > 0:
            raise ConfigError("schedule.eps0 must be > 0")
        if not 0 < self.alpha <= 1:
            raise ConfigError(f"schedule.alpha must lie in (0, 1], got {self.alpha}")
        if self.target_eps is not None and not self.target_eps > 0:
            raise ConfigError("schedule.target_eps must be > 0")
        if self.early_stop_tol is not None and not self.early_stop_tol > 0:
            raise ConfigError("schedule.early_stop_tol must be > 0")


def _ceil(x: float) -> int:
    r = round(x)
    if abs(x - r) <= 1e-9 * max(1.0, abs(x)):
        return max(1, int(r))
    return max(1, math.ceil(x))


def adaptive_frequency(max_branching: int, sum_infosets: int, eps: float) -> float:
    return math.sqrt(max_branching) * sum_infosets / eps


def stochastic_adaptive_frequency(max_branching: int, sum_infosets: int, horizon: int, eps: float) -> float:
    return math.sqrt(max_branching * sum_infosets ** 3 / (horizon * eps ** 2))


def next_check(schedule: Schedule, stats: RestrictedStats, eps: float | None = None) -> int | None:
    """Iterations between best-response checks in the current window.

    Returns None for schedules that do not check on a fixed count (``xdo``
    and the ``none`` baseline).
    """
    kind = schedule.kind
    if kind in ("none", "xdo"):
        return None
    if kind == "xodo":
        return 1
    if kind in ("pdo", "spdo"):
        return schedule.c
    eps = schedule.target_eps if schedule.target_eps is not None else eps
    if eps is None or not eps > 0:
        raise ConfigError(f"{kind} needs a target exploitability")
    if kind == "adado":
        return _ceil(schedule.alpha * adaptive_frequency(stats.max_branching, stats.sum_infosets, eps))
    return _ceil(stochastic_adaptive_frequency(stats.max_branching, stats.sum_infosets,
                                               max(1, stats.horizon), eps))


def xdo_threshold(eps0: float, j: int) -> float:
    return eps0 / 2 ** j


def xdo_should_expand(local_exploitability: float, eps0: float, j: int) -> bool:
    return local_exploitability <= xdo_threshold(eps0, j)


def adado_early_stop(e_now: float, e_prev: float | None, tol: float) -> bool:
    """Plateau test: the local exploitability barely moved since the last check."""
    return e_prev is not None and abs(e_now - e_prev) < tol


@dataclass
class MetricRecord:
    iteration: int
    nodes_rm: int
    nodes_br: int
    nodes_eval: int
    nodes_reported: int
    exploitability_las: float | None
    exploitability_oas: float | None
    window_j: int
    sum_infosets: int
    population_size: int
    wall_ms: float | None


METRIC_COLUMNS = tuple(MetricRecord.__dataclass_fields__)


@dataclass
class CheckEvent:
    iteration: int
    window_j: int
    event: str
    local_exploitability: float | None = None
    threshold: float | None = None
    changed: bool | None = None
    added: int = 0
    charged: int = 0
    charged_to: str = ""
    nodes_reported: int = 0


EVENT_COLUMNS = tuple(CheckEvent.__dataclass_fields__)


@dataclass
class RunLog:
    records: list[MetricRecord] = field(default_factory=list)
    events: list[CheckEvent] = field(default_factory=list)
    stop_reason: str = ""
    populations: list[int] = field(default_factory=list)  # population size at each window start


@dataclass(frozen=True)
class LogCadence:
    mode: str = "geometric"   # geometric | iterations | nodes
    every: int = 100
    ratio: float = 1.25
    exploitability: bool = True
    oas: bool = False
    wall_time: bool = False

    def __post_init__(self) -> None:
        if self.mode not in ("geometric", "iterations", "nodes"):
            raise ConfigError(f"log.mode must be geometric, iterations or nodes, got {self.mode!r}")
        if self.every < 1:
            raise ConfigError("log.every must be >= 1")
        if not self.ratio > 1:
            raise ConfigError("log.ratio must be > 1")


@dataclass(frozen=True)
class StopCondition:
    node_budget: int | None = None
    target_exploitability: float | None = None
    max_iterations: int | None = None

    def __post_init__(self) -> None:
        if self.node_budget is None and self.target_exploitability is None and self.max_iterations is None:
            raise ConfigError("a stop condition is required (node_budget, target_exploitability or max_iterations)")
        for name in ("node_budget", "max_iterations"):
            v = getattr(self, name)
            if v is not None and (not isinstance(v, int) or v < 1):
                raise ConfigError(f"stop.{name} must be a positive integer")
        if self.target_exploitability is not None and not self.target_exploitability > 0:
            raise ConfigError("stop.target_exploitability must be > 0")


class Engine:
    """One run of the double-oracle loop (or a plain baseline when ``schedule.kind == 'none'``)."""

    def __init__(self, game: GameTree, schedule: Schedule, solver: str = "cfr",
                 warm: WarmStartMode = WarmStartMode(), seed: int = 0, explore: float = 0.6,
                 target_eps: float | None = None, track_oas: bool = False) -> None:
        if solver not in SOLVERS:
            raise ConfigError(f"unknown solver {solver!r}; choose from {SOLVERS}")
        if schedule.kind in STOCHASTIC and solver != "mccfr":
            raise ConfigError(f"{schedule.kind} runs on the sampled solver; set solver = \"mccfr\"")
        if schedule.kind in ("adado", "sado") and schedule.target_eps is None and target_eps is None:
            raise ConfigError(f"{schedule.kind} needs schedule.target_eps or stop.target_exploitability")
        self.game = game
        self.tree: Tree = game.tree
        self.schedule = schedule
        self.solver = solver
        self.warm = warm
        self.target_eps = target_eps
        self.sampler = SamplerParams(explore, seed)
        self.counter = NodeCounter()
        self.log = RunLog()
        self.t = 0
        self.t_window = 0
        self.j = 0
        self.e_prev: float | None = None
        self.profile = TabularProfile.zeros(self.tree)
        self.oas_sum = np.zeros(self.tree.n_slots) if track_oas else None
        if schedule.kind == "none":
            self.population = Population.full(self.tree)
        else:
            self.population = initial_population(game, self.counter)
        self._enter_window()

    # -- window bookkeeping ---------------------------------------------
    def _enter_window(self, restoring: bool = False) -> None:
        if self.schedule.kind == "none":
            self.view = self.game
        else:
            self.view = RestrictedView(self.game, self.population)
        self.inside = self.tree.in_tree(self.view.mask)
        # stats drive the sado frequency; elsewhere they are reporting only
        category = "best_response" if self.schedule.kind == "sado" else "evaluation"
        before = getattr(self.counter, category)
        self.stats = restricted_stats(self.view, None if restoring else self.counter, category, window=self.j)
        self.m = next_check(self.schedule, self.stats, self.target_eps)
        if restoring:
            return
        self.log.populations.append(self.population.size)
        self.log.events.append(CheckEvent(
            self.t, self.j, "window", changed=None, charged=getattr(self.counter, category) - before,
            charged_to=category, nodes_reported=self.counter.reported))

    # -- policies ---------------------------------------------------------
    def las_policy(self) -> np.ndarray:
        """Last-window average strategy expanded to the full game (zeros off-population)."""
        return average_policy(self.tree, self.profile.strategy_sum, self.view.mask)[0]

    def oas_policy(self) -> np.ndarray:
        if self.oas_sum is None:
            raise ConfigError("overall average strategy is not tracked for this run")
        if self.t < 1:
            raise ConfigError("no iteration has run yet")
        return average_policy(self.tree, self.oas_sum, self.view.mask)[0]

    def current_policy(self) -> np.ndarray:
        return self.profile.current_policy(self.tree, self.view.mask)

    # -- iteration --------------------------------------------------------
    def _iterate(self) -> None:
        extra = () if self.oas_sum is None else (self.oas_sum,)
        if self.solver == "mccfr":
            mccfr_episode(self.view, self.profile, self.sampler, self.counter, extra_sums=extra)
        elif self.solver == "lcfr":
            w = float(self.profile.iteration + 1)
            cfr_iteration(self.view, self.profile, weight=w, counter=self.counter, regret_weight=w,
                          extra_sums=extra, inside=self.inside)
        else:
            cfr_iteration(self.view, self.profile, counter=self.counter, extra_sums=extra,
                          inside=self.inside)

    def local_exploitability(self) -> float:
        """Exploitability of the window average inside the restricted game (algorithmic work)."""
        return exploitability(self.view, self.las_policy(), self.counter, "best_response")

    def step(self) -> None:
        self.t += 1
        self.t_window += 1
        self._iterate()
        kind = self.schedule.kind
        if kind == "none":
            return
        due = False
        if kind == "xdo":
            if self.t_window % self.schedule.check_every == 0:
                before = self.counter.best_response
                e = self.local_exploitability()
                thr = xdo_threshold(self.schedule.eps0, self.j)
                due = e <= thr
                self.log.events.append(CheckEvent(
                    self.t, self.j, "xdo_local", e, thr, charged=self.counter.best_response - before,
                    charged_to="best_response", nodes_reported=self.counter.reported))
        else:
            due = self.t_window % self.m == 0
            sched = self.schedule
            if (not due and kind in ("adado", "sado") and sched.early_stop_tol is not None
                    and self.t_window % sched.early_stop_every == 0):
                before = self.counter.best_response
                e = self.local_exploitability()
                due = adado_early_stop(e, self.e_prev, sched.early_stop_tol)
                self.log.events.append(CheckEvent(
                    self.t, self.j, "early_stop_check", e, sched.early_stop_tol, changed=None,
                    charged=self.counter.best_response - before, charged_to="best_response",
                    nodes_reported=self.counter.reported))
                self.e_prev = e
        if due:
            self.check()

    def check(self) -> bool:
        """Best responses against the window average; expand and open a new window on change."""
        before = self.counter.best_response
        las = self.las_policy()
        br1 = best_response(self.game, las, 0, self.counter, "best_response")
        br2 = best_response(self.game, las, 1, self.counter, "best_response")
        new_pop, changed, added = expand(self.population, br1, br2)
        self.log.events.append(CheckEvent(
            self.t, self.j, "br_check",
            threshold=xdo_threshold(self.schedule.eps0, self.j) if self.schedule.kind == "xdo" else None,
            changed=changed, added=len(added), charged=self.counter.best_response - before,
            charged_to="best_response", nodes_reported=self.counter.reported))
        if changed:
            self.profile = warm_start(self.profile, self.population.mask, added, self.warm, self.tree)
            self.population = new_pop
            self.j += 1
            self.t_window = 0
            self.e_prev = None
            self._enter_window()
        return changed

    # -- logging and the main loop ------------------------------------------
    def record(self, cadence: LogCadence, t0: float | None = None) -> MetricRecord:
        e_las = e_oas = None
        if cadence.exploitability:
            e_las = exploitability(self.game, self.las_policy(), self.counter, "evaluation")
            if cadence.oas and self.oas_sum is not None:
                e_oas = exploitability(self.game, self.oas_policy(), self.counter, "evaluation")
        c = self.counter
        wall = None
        if cadence.wall_time and t0 is not None:
            wall = round((time.perf_counter() - t0) * 1000.0, 3)
        rec = MetricRecord(self.t, c.regret_min, c.best_response, c.evaluation, c.reported, e_las, e_oas,
                           self.j, self.stats.sum_infosets, self.population.size, wall)
        self.log.records.append(rec)
        return rec

    def run(self, stop: StopCondition, cadence: LogCadence = LogCadence()) -> tuple[np.ndarray, RunLog]:
        if stop.target_exploitability is not None and not cadence.exploitability:
            raise ConfigError("a target exploitability stop needs exploitability logging")
        t0 = time.perf_counter()
        last_nodes = None
        last_iter = self.t
        while True:
            self.step()
            due = False
            if last_nodes is None:
                due = True
            elif cadence.mode == "geometric":
                due = self.counter.reported >= last_nodes * cadence.ratio
            elif cadence.mode == "nodes":
                due = self.counter.reported - last_nodes >= cadence.every
            else:
                due = self.t - last_iter >= cadence.every
            rec = None
            if due:
                rec = self.record(cadence, t0)
                last_nodes, last_iter = self.counter.reported, self.t
            reason = ""
            if stop.node_budget is not None and self.counter.reported >= stop.node_budget:
                reason = "node_budget"
            elif (stop.target_exploitability is not None and rec is not None
                  and rec.exploitability_las is not None
                  and rec.exploitability_las <= stop.target_exploitability):
                reason = "target_exploitability"
            elif stop.max_iterations is not None and self.t >= stop.max_iterations:
                reason = "max_iterations"
            if reason:
                if rec is None:
                    self.record(cadence, t0)
                self.log.stop_reason = reason
                log.info("run stopped (%s) at iteration %d, %d reported nodes", reason, self.t,
                         self.counter.reported)
                return self.las_policy(), self.log

    # -- snapshots ----------------------------------------------------------
    def save_snapshot(self, path: str | Path) -> Path:
        """Write population, tables, counters and rng state to a versioned ``.npz``."""
        path = Path(path)
        meta = {
            "version": SNAPSHOT_VERSION,
            "t": self.t, "t_window": self.t_window, "j": self.j, "e_prev": self.e_prev,
            "counter": asdict(self.counter), "iteration": self.profile.iteration,
            "rng": self.sampler.rng.bit_generator.state,
            "schedule": asdict(self.schedule), "solver": self.solver,
            "warm": asdict(self.warm), "game": self.game.name, "params": self.game.params,
        }
        arrays = {
            "population": self.population.mask, "regrets": self.profile.regrets,
            "strategy_sum": self.profile.strategy_sum,
        }
        if self.oas_sum is not None:
            arrays["oas_sum"] = self.oas_sum
        with open(path, "wb") as fh:
            np.savez(fh, meta=np.array(json.dumps(meta)), **arrays)
        return path

    def load_snapshot(self, path: str | Path) -> "Engine":
        with np.load(path, allow_pickle=False) as data:
            meta = json.loads(str(data["meta"]))
            if meta["version"] != SNAPSHOT_VERSION:
                raise ConfigError(f"unsupported snapshot version {meta['version']}")
            if meta["game"] != self.game.name or meta["params"] != self.game.params:
                raise ConfigError("snapshot belongs to a different game")
            self.population = Population(self.tree, data["population"])
            self.profile = TabularProfile(data["regrets"].copy(), data["strategy_sum"].copy(),
                                          meta["iteration"])
            if "oas_sum" in data:
                self.oas_sum = data["oas_sum"].copy()
        self.t, self.t_window, self.j, self.e_prev = meta["t"], meta["t_window"], meta["j"], meta["e_prev"]
        self.counter = NodeCounter(**meta["counter"])
        self.sampler.rng.bit_generator.state = meta["rng"]
        self._enter_window(restoring=True)
        return self
