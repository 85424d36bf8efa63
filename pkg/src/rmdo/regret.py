"""Tabular regret minimization: regret matching, CFR / linear CFR sweeps and
outcome-sampling Monte-Carlo CFR.

All tables are flat arrays over the action slots of a compiled :class:`Tree`.
A restricted game is expressed by a boolean slot mask; slots outside the mask
keep zero regret and zero probability, and subtrees below them are neither
traversed nor counted.
"""

from __future__ import annotations

import bisect
import enum
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .core import (KIND_CHANCE, KIND_TERMINAL, ContractError, NodeCounter,
                   StructuralError, Tree, charge)


class WeightScheme(str, enum.Enum):
    UNIFORM = "uniform"
    LINEAR = "linear"

    def weight(self, t: int) -> float:
        if t < 1:
            raise ContractError("iterations are numbered from 1")
        return 1.0 if self is WeightScheme.UNIFORM else float(t)


def regret_matching(regrets: Sequence[float]) -> np.ndarray:
    """Probabilities proportional to positive regret, uniform when none is positive."""
    r = np.asarray(regrets, dtype=np.float64)
    if r.ndim != 1 or r.size == 0:
        raise ContractError("regret matching needs a non-empty vector")
    if not np.all(np.isfinite(r)):
        raise ContractError("regrets must be finite")
    pos = np.where(r > 0, r, 0.0)
    total = pos.sum()
    if total > 0:
        return pos / total
    return np.full(r.size, 1.0 / r.size)


def regret_matching_table(tree: Tree, regrets: np.ndarray, mask: np.ndarray) -> np.ndarray:
    """Vectorized regret matching for every information state over its allowed slots."""
    pos = np.where((regrets > 0) & mask, regrets, 0.0)
    starts = tree.slot_offset[:-1]
    total = np.add.reduceat(pos, starts)
    allowed = np.add.reduceat(mask.astype(np.float64), starts)
    t = total[tree.slot_infoset]
    a = allowed[tree.slot_infoset]
    uniform = np.divide(mask, a, out=np.zeros_like(pos), where=a > 0)
    return np.where(t > 0, pos / np.where(t > 0, t, 1.0), uniform)


def average_policy(tree: Tree, strategy_sum: np.ndarray, mask: np.ndarray | None = None
                   ) -> tuple[np.ndarray, np.ndarray]:
    """Normalize accumulated strategies per information state.

    Returns the policy and a per-information-state flag marking states with
    zero accumulated weight; those get the uniform distribution over their
    allowed actions.
    """
    if mask is None:
        mask = tree.full_mask
    acc = np.where(mask, strategy_sum, 0.0)
    starts = tree.slot_offset[:-1]
    total = np.add.reduceat(acc, starts)
    allowed = np.add.reduceat(mask.astype(np.float64), starts)
    unreached = ~(total > 0)
    t = total[tree.slot_infoset]
    a = allowed[tree.slot_infoset]
    uniform = np.divide(mask, a, out=np.zeros_like(acc), where=a > 0)
    pol = np.where(t > 0, acc / np.where(t > 0, t, 1.0), uniform)
    return pol, unreached


@dataclass
class TabularProfile:
    """Cumulative regrets and cumulative weighted strategies over all slots.

    ``iteration`` counts iterations since the tables were last reset and
    drives linear weighting.
    """

    regrets: np.ndarray
    strategy_sum: np.ndarray
    iteration: int = 0

    @classmethod
    def zeros(cls, tree: Tree) -> "TabularProfile":
        return cls(np.zeros(tree.n_slots), np.zeros(tree.n_slots))

    def copy(self) -> "TabularProfile":
        return TabularProfile(self.regrets.copy(), self.strategy_sum.copy(), self.iteration)

    def current_policy(self, tree: Tree, mask: np.ndarray) -> np.ndarray:
        return regret_matching_table(tree, self.regrets, mask)

    def average(self, tree: Tree, mask: np.ndarray) -> np.ndarray:
        return average_policy(tree, self.strategy_sum, mask)[0]


# -- exact sweeps ---------------------------------------------------------------

def edge_probabilities(tree: Tree, policy: np.ndarray) -> np.ndarray:
    """Probability of the edge into every node under ``policy`` (chance included)."""
    es = tree.edge_slot
    return np.where(es >= 0, policy[np.maximum(es, 0)], tree.chance_prob)


def reach_split(tree: Tree, edge_p: np.ndarray, player: int, inside: np.ndarray
                ) -> tuple[np.ndarray, np.ndarray]:
    """Per-node reach split into ``player``'s own contribution and everyone else's.

    Nodes outside the restricted tree get zero in both arrays.
    """
    own_f = np.where(tree.edge_owner == player, edge_p, 1.0)
    oth_f = np.where(tree.edge_owner == player, 1.0, edge_p)
    own = np.empty(tree.n_nodes)
    oth = np.empty(tree.n_nodes)
    own[0] = oth[0] = 1.0
    for lo, hi in list(tree.levels())[1:]:
        par = tree.parent[lo:hi]
        own[lo:hi] = own[par] * own_f[lo:hi]
        oth[lo:hi] = oth[par] * oth_f[lo:hi]
    own *= inside
    oth *= inside
    return own, oth


def node_values(tree: Tree, edge_p: np.ndarray, player: int, inside: np.ndarray) -> np.ndarray:
    """Expected payoff to ``player`` from every node onward."""
    sign = 1.0 if player == 0 else -1.0
    v = np.where(tree.kind == KIND_TERMINAL, sign * tree.payoff, 0.0)
    w = edge_p * inside
    levels = list(tree.levels())
    for d in range(len(levels) - 1, 0, -1):
        lo, hi = levels[d]
        plo, phi = levels[d - 1]
        sums = np.bincount(tree.parent[lo:hi] - plo, weights=w[lo:hi] * v[lo:hi], minlength=phi - plo)
        internal = tree.kind[plo:phi] != KIND_TERMINAL
        v[plo:phi] = np.where(internal, sums, v[plo:phi])
    return v


@dataclass
class SweepResult:
    instant_regret: np.ndarray   # per slot, zero outside the player's allowed slots
    own_reach: np.ndarray        # per information state, player's own reach
    cf_value: np.ndarray         # per information state, counterfactual value
    node_value: np.ndarray
    visited: int


def _player_children(tree: Tree, player: int) -> np.ndarray:
    cache = tree.__dict__.setdefault("_player_children", {})
    if player not in cache:
        cache[player] = np.flatnonzero(tree.edge_owner == player)
    return cache[player]


def _player_nodes(tree: Tree, player: int) -> np.ndarray:
    cache = tree.__dict__.setdefault("_player_nodes", {})
    if player not in cache:
        cache[player] = np.flatnonzero(tree.kind == player)
    return cache[player]


def sweep(tree: Tree, mask: np.ndarray, policy: np.ndarray, player: int,
          inside: np.ndarray | None = None) -> SweepResult:
    """One exact traversal for ``player``: instantaneous counterfactual regrets,
    counterfactual values and own reach of every information state."""
    if inside is None:
        inside = tree.in_tree(mask)
    edge_p = edge_probabilities(tree, policy)
    own, oth = reach_split(tree, edge_p, player, inside)
    v = node_values(tree, edge_p, player, inside)

    ch = _player_children(tree, player)
    ch = ch[inside[ch]]
    par = tree.parent[ch]
    regret = np.bincount(tree.edge_slot[ch], weights=oth[par] * (v[ch] - v[par]),
                         minlength=tree.n_slots)

    nodes = _player_nodes(tree, player)
    nodes = nodes[inside[nodes]]
    isets = tree.infoset[nodes]
    if nodes.size:
        counts = np.bincount(isets, weights=np.ones(nodes.size), minlength=tree.n_infosets)
        allowed_n = np.add.reduceat(mask.astype(np.int64), tree.slot_offset[:-1])
        bad = (counts > 0) & (allowed_n == 0)
        if bad.any():
            raise StructuralError(
                f"information state {tree.keys[int(np.flatnonzero(bad)[0])]!r} has no allowed action")
    own_reach = np.zeros(tree.n_infosets)
    own_reach[isets] = own[nodes]
    cfv = np.bincount(isets, weights=oth[nodes] * v[nodes], minlength=tree.n_infosets)
    return SweepResult(regret, own_reach, cfv, v, int(inside.sum()))


def _player_slots(tree: Tree, player: int) -> np.ndarray:
    cache = tree.__dict__.setdefault("_player_slots", {})
    if player not in cache:
        cache[player] = tree.infoset_player[tree.slot_infoset] == player
    return cache[player]


def cfr_iteration(view, profile: TabularProfile, weight: float = 1.0,
                  counter: NodeCounter | None = None, regret_weight: float = 1.0,
                  extra_sums: Sequence[np.ndarray] = (), inside: np.ndarray | None = None,
                  ) -> TabularProfile:
    """Alternating-update CFR iteration on ``view`` (a game or restricted view).

    Player 1 is updated first with the current policies, then player 2 with
    policies refreshed by regret matching. Each sweep adds ``regret_weight``
    times the instantaneous regret and ``weight`` times own-reach times the
    current policy to the tables (and to every array in ``extra_sums``).
    """
    if weight < 1 or regret_weight <= 0:
        raise ContractError("weights must be >= 1")
    tree: Tree = view.tree
    mask: np.ndarray = view.mask
    if inside is None:
        inside = tree.in_tree(mask)
    for player in (0, 1):
        policy = regret_matching_table(tree, profile.regrets, mask)
        res = sweep(tree, mask, policy, player, inside)
        slots = _player_slots(tree, player) & mask
        profile.regrets[slots] += regret_weight * res.instant_regret[slots]
        inc = weight * res.own_reach[tree.slot_infoset] * policy
        inc[~slots] = 0.0
        profile.strategy_sum += inc
        for extra in extra_sums:
            extra += inc
        charge(counter, "regret_min", res.visited)
    profile.iteration += 1
    return profile


def instantaneous_regrets(view, policy: np.ndarray, player: int) -> np.ndarray:
    return sweep(view.tree, view.mask, policy, player).instant_regret


def counterfactual_values(view, policy: np.ndarray, player: int) -> np.ndarray:
    return sweep(view.tree, view.mask, policy, player).cf_value


# -- outcome sampling -----------------------------------------------------------

@dataclass
class SamplerParams:
    explore: float = 0.6
    rng_seed: int = 0
    rng: np.random.Generator = field(init=False, repr=False)

    def __post_init__(self) -> None:
        if not (0.0 < self.explore <= 1.0):
            raise ContractError(f"explore must lie in (0, 1], got {self.explore}")
        self.rng = np.random.default_rng(self.rng_seed)


@dataclass
class SampledUpdate:
    """Estimates produced at one updating-player node of a sampled trajectory."""

    player: int
    infoset: int
    cf_value: float
    regrets: list[float]


def _match(regrets: list[float], allowed: list[bool]) -> list[float]:
    pos = [r if (r > 0 and ok) else 0.0 for r, ok in zip(regrets, allowed)]
    total = sum(pos)
    if total > 0:
        return [p / total for p in pos]
    n = sum(allowed)
    if n == 0:
        raise StructuralError("information state with no allowed action in view")
    return [1.0 / n if ok else 0.0 for ok in allowed]


def _sample(rng: np.random.Generator, probs: list[float]) -> int:
    u = rng.random()
    acc = 0.0
    last = 0
    for a, p in enumerate(probs):
        if p > 0:
            acc += p
            last = a
            if u < acc:
                return a
    return last


def mccfr_episode(view, profile: TabularProfile, params: SamplerParams,
                  counter: NodeCounter | None = None, weight: float = 1.0,
                  extra_sums: Sequence[np.ndarray] = (), apply: bool = True,
                  record: list[SampledUpdate] | None = None) -> TabularProfile:
    """One outcome-sampling episode: a trajectory per updating player.

    At the updating player's nodes actions are drawn from
    ``(1 - explore) * current + explore * uniform(allowed)``; elsewhere from the
    current policy (or chance). Regret estimates are importance weighted by the
    inverse sampling probability. The average strategy of the other player is
    accumulated with stochastically-weighted averaging. ``apply=False`` leaves
    the tables untouched, which is useful for estimator checks.
    """
    tree: Tree = view.tree
    py = tree.py
    mask_l = view.mask
    rng = params.rng
    explore = params.explore
    kinds, fcs, ncs, isets, offs = py.kind, py.first_child, py.num_children, py.infoset, py.slot_offset
    regrets = profile.regrets
    ssum = profile.strategy_sum
    limit = tree.n_levels
    for player in (0, 1):
        node = 0
        opp_reach = 1.0
        samp = 1.0
        path = []
        visited = 0
        while kinds[node] != KIND_TERMINAL:
            visited += 1
            if visited > limit:
                raise StructuralError("sampled trajectory exceeds the tree depth")
            k = kinds[node]
            fc = fcs[node]
            if k == KIND_CHANCE:
                cum = py.chance_cum[node]
                a = min(bisect.bisect_right(cum, rng.random()), len(cum) - 1)
                p = py.chance_prob[fc + a]
                opp_reach *= p
                samp *= p
                node = fc + a
                continue
            n = ncs[node]
            o = offs[isets[node]]
            allowed = mask_l[o:o + n].tolist()
            pol = _match(regrets[o:o + n].tolist(), allowed)
            if k == player:
                n_ok = sum(allowed)
                sp = [(1.0 - explore) * p + (explore / n_ok if ok else 0.0)
                      for p, ok in zip(pol, allowed)]
            else:
                sp = pol
            a = _sample(rng, sp)
            path.append((k, isets[node], o, n, allowed, pol, sp, a, opp_reach, samp))
            if k != player:
                opp_reach *= pol[a]
            samp *= sp[a]
            node = fc + a
        visited += 1
        value = py.payoff[node] if player == 0 else -py.payoff[node]
        for k, iset, o, n, allowed, pol, sp, a, opp_r, s_r in reversed(path):
            child = value / sp[a]
            est = pol[a] * child
            w = opp_r / s_r
            if k == player:
                incs = [((child if b == a else 0.0) - est) * w if allowed[b] else 0.0
                        for b in range(n)]
                if apply:
                    regrets[o:o + n] += np.asarray(incs)
                if record is not None:
                    record.append(SampledUpdate(player, iset, est * w, incs))
            elif apply:
                inc = np.asarray(pol) * (weight * w)
                ssum[o:o + n] += inc
                for extra in extra_sums:
                    extra[o:o + n] += inc
            value = est
        charge(counter, "regret_min", visited)
    if apply:
        profile.iteration += 1
    return profile
