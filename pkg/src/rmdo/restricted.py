"""Populations of allowed actions, restricted-game views, expansion and warm starting."""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Iterator

import numpy as np

from .core import (ContractError, GameTree, HistoryRef, InfoStateKey, NodeCounter, Player,
                   StructuralError, Tree, charge)
from .evaluation import BestResponseResult, best_response
from .regret import TabularProfile


class Population:
    """Allowed actions per information state, stored as a read-only slot mask."""

    def __init__(self, tree: Tree, mask: np.ndarray) -> None:
        mask = np.array(mask, dtype=bool)
        if mask.shape != (tree.n_slots,):
            raise ContractError("population mask does not match the tree")
        mask.flags.writeable = False
        self.tree = tree
        self.mask = mask

    @classmethod
    def empty(cls, tree: Tree) -> "Population":
        return cls(tree, np.zeros(tree.n_slots, dtype=bool))

    @classmethod
    def full(cls, tree: Tree) -> "Population":
        return cls(tree, np.ones(tree.n_slots, dtype=bool))

    @classmethod
    def from_policies(cls, tree: Tree, *policies: np.ndarray) -> "Population":
        mask = np.zeros(tree.n_slots, dtype=bool)
        for p in policies:
            mask |= np.asarray(p) > 0
        return cls(tree, mask)

    def allowed(self, key: InfoStateKey) -> tuple[int, ...]:
        iid = self.tree.infoset_of(key)
        o, e = self.tree.slot_offset[iid], self.tree.slot_offset[iid + 1]
        return tuple(int(a) for a in np.flatnonzero(self.mask[o:e]))

    def items(self) -> Iterator[tuple[InfoStateKey, tuple[int, ...]]]:
        for iid in range(self.tree.n_infosets):
            key = self.tree.info_key(iid)
            acts = self.allowed(key)
            if acts:
                yield key, acts

    @property
    def size(self) -> int:
        """Number of (information state, action) pairs."""
        return int(self.mask.sum())

    def __len__(self) -> int:
        return sum(1 for _ in self.items())

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Population) and other.tree is self.tree and np.array_equal(
            other.mask, self.mask)

    def __le__(self, other: "Population") -> bool:
        return bool(np.all(other.mask[self.mask]))

    def to_text(self) -> str:
        lines = ["# rmdo population v1"]
        for key, acts in self.items():
            lines.append(f"P{int(key.player) + 1}\t{_key_text(key.key)}\t{','.join(map(str, acts))}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, tree: Tree, text: str) -> "Population":
        mask = np.zeros(tree.n_slots, dtype=bool)
        for n, line in enumerate(text.splitlines(), 1):
            if not line.strip() or line.startswith("#"):
                continue
            try:
                who, key, acts = line.split("\t")
                iid = tree.infoset_of((int(who[1:]) - 1, _key_bytes(key)))
                for a in acts.split(","):
                    if not 0 <= int(a) < tree.infoset_num_actions[iid]:
                        raise ValueError(f"action {a} out of range")
                    mask[tree.slot(iid, int(a))] = True
            except (ValueError, KeyError) as exc:
                raise ContractError(f"population line {n}: {exc}") from exc
        return cls(tree, mask)


def _key_text(key: bytes) -> str:
    try:
        s = key.decode("ascii")
    except UnicodeDecodeError:
        s = None
    if s is None or not s.isprintable() or "\t" in s or s.startswith("hex:"):
        return "hex:" + key.hex()
    return s


def _key_bytes(text: str) -> bytes:
    return bytes.fromhex(text[4:]) if text.startswith("hex:") else text.encode("ascii")


class RestrictedView(GameTree):
    """The base game with every information state limited to its allowed actions.

    Action indices keep their base-game meaning. Chance nodes pass through
    unchanged. Solvers read ``tree`` (the base arena) and ``mask``.
    """

    def __init__(self, base: GameTree, population: Population) -> None:
        super().__init__(**base.params)
        if population.tree is not base.tree:
            raise ContractError("population belongs to a different game")
        self.base = base
        self.population = population
        self.name = f"{base.name}[restricted]"

    @property
    def tree(self) -> Tree:  # type: ignore[override]
        return self.base.tree

    @property
    def mask(self) -> np.ndarray:
        return self.population.mask

    @property
    def utility_range(self) -> tuple[float, float]:
        return self.base.utility_range

    @cached_property
    def inside(self) -> np.ndarray:
        return self.tree.in_tree(self.mask)

    def _initial(self):
        return self.base._initial()

    def _owner(self, state):
        return self.base._owner(state)

    def _actions(self, state):
        return self.base._actions(state)

    def _next(self, state, action):
        return self.base._next(state, action)

    def _chance(self, state):
        return self.base._chance(state)

    def _payoff(self, state):
        return self.base._payoff(state)

    def _infokey(self, state):
        return self.base._infokey(state)

    def _allowed_at(self, state) -> list[int]:
        owner = self._owner(state)
        n = len(self._actions(state)) if owner is not None else 0
        if owner in (Player.P1, Player.P2):
            iid = self.tree.key_index.get((int(owner), self._infokey(state)))
            if iid is None:
                return []
            o = self.tree.slot_offset[iid]
            return [a for a in range(n) if self.mask[o + a]]
        return list(range(n))

    def _replay(self, path):
        state = self._initial()
        for a in path:
            if a not in self._allowed_at(state):
                raise StructuralError(f"action {a} not allowed in the restricted game at {tuple(path)}")
            state = self._next(state, a)
        return state

    def legal_actions(self, h: HistoryRef) -> list[int]:
        return self._allowed_at(self._replay(h.path))

    def histories(self) -> Iterator[HistoryRef]:
        stack = [((), self._initial())]
        while stack:
            path, state = stack.pop()
            yield self._ref(path, state)
            for a in reversed(self._allowed_at(state)):
                stack.append((path + (a,), self._next(state, a)))

    def num_infostates(self, player: Player) -> int:
        t = self.tree
        nodes = np.flatnonzero(self.inside & (t.kind == int(player)))
        return int(np.unique(t.infoset[nodes]).size)

    @property
    def horizon(self) -> int:
        return restricted_stats(self).horizon


@dataclass(frozen=True)
class RestrictedStats:
    sum_infosets: int
    max_branching: int
    horizon: int
    window: int = 0


@dataclass(frozen=True)
class WarmStartMode:
    kind: str = "reset"          # "reset" or "carry"
    eps_init: float = 1e-6
    carry_strategy: bool = True

    def __post_init__(self) -> None:
        if self.kind not in ("reset", "carry"):
            raise ContractError(f"warm start mode must be reset or carry, got {self.kind!r}")
        if self.kind == "carry" and not self.eps_init > 0:
            raise ContractError("eps_init must be > 0 when carrying")


def initial_population(game: GameTree, counter: NodeCounter | None = None,
                       category: str = "best_response") -> Population:
    """Best responses of both players against the uniform random profile."""
    tree = game.tree
    uniform = 1.0 / tree.infoset_num_actions[tree.slot_infoset]
    brs = [best_response(game, uniform, p, counter, category) for p in (0, 1)]
    return Population.from_policies(tree, *(b.policy for b in brs))


def expand(pop: Population, br1: BestResponseResult | np.ndarray, br2: BestResponseResult | np.ndarray
           ) -> tuple[Population, bool, list[tuple[InfoStateKey, int]]]:
    """Union of the population with two pure best-response policies."""
    tree = pop.tree
    new = pop.mask.copy()
    for br in (br1, br2):
        pol = br.policy if isinstance(br, BestResponseResult) else np.asarray(br)
        new |= pol > 0
    added_slots = np.flatnonzero(new & ~pop.mask)
    if added_slots.size == 0:
        return pop, False, []
    added = [(tree.info_key(int(tree.slot_infoset[s])), int(tree.slot_action[s])) for s in added_slots]
    return Population(tree, new), True, added


def added_slots(tree: Tree, added: Iterable[tuple[InfoStateKey, int]]) -> np.ndarray:
    return np.array([tree.slot(tree.infoset_of(k), a) for k, a in added], dtype=np.int64)


def warm_start(previous: TabularProfile, previous_mask: np.ndarray, added: Iterable[tuple[InfoStateKey, int]],
               mode: WarmStartMode, tree: Tree) -> TabularProfile:
    """Tables for the expanded restricted game.

    ``reset`` starts from zero. ``carry`` keeps every old pair's regret and
    cumulative strategy and seeds each newly added pair with ``eps_init``.
    """
    if mode.kind == "reset":
        return TabularProfile.zeros(tree)
    slots = added_slots(tree, added)
    if slots.size and np.any(previous_mask[slots]):
        raise ContractError("an added pair already belongs to the previous restricted game")
    out = previous.copy()
    out.regrets[slots] = mode.eps_init
    if mode.carry_strategy:
        out.strategy_sum[slots] = mode.eps_init
    else:
        out.strategy_sum[:] = 0.0
    return out


def restricted_stats(view, counter: NodeCounter | None = None, category: str | None = "evaluation",
                     window: int = 0) -> RestrictedStats:
    """Information-state count, widest allowed branching and decision horizon."""
    tree: Tree = view.tree
    mask = view.mask
    if not mask.any():
        raise ContractError("restricted game has an empty population")
    dd, inside = tree.decision_depth_in(mask)
    dec = np.flatnonzero(inside & (tree.kind <= 1))
    isets = np.unique(tree.infoset[dec])
    if isets.size == 0:
        raise ContractError("restricted game has no decision nodes")
    allowed = np.add.reduceat(mask.astype(np.int64), tree.slot_offset[:-1])
    charge(counter, category, int(inside.sum()))
    return RestrictedStats(
        sum_infosets=int(isets.size),
        max_branching=int(allowed[isets].max()),
        horizon=int(dd[inside].max()),
        window=window,
    )
