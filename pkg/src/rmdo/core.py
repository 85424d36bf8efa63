"""Extensive-form game abstraction, compiled trees and visited-node accounting.

Games are written against a small rule interface (initial state, owner,
actions, successor, chance distribution, payoff, information-state key).
Every solver in the package works on the compiled breadth-first arena produced
by :meth:`GameTree.tree`, which stores the whole game as flat numpy arrays.
"""

from __future__ import annotations

import abc
import enum
from collections import deque
from dataclasses import dataclass, field
from functools import cached_property
from typing import Any, Iterator, NamedTuple, Sequence

import numpy as np

CHANCE_TOL = 1e-12
ZERO_SUM_TOL = 1e-12


class StructuralError(RuntimeError):
    """The game tree or a restricted view is malformed."""


class ContractError(ValueError):
    """An operation was called outside its precondition."""


class ConfigError(ValueError):
    """Invalid game or run configuration."""


class Player(enum.IntEnum):
    P1 = 0
    P2 = 1
    CHANCE = 2


# node kinds stored in Tree.kind
KIND_P1, KIND_P2, KIND_CHANCE, KIND_TERMINAL = 0, 1, 2, 3


@dataclass(frozen=True)
class HistoryRef:
    path: tuple[int, ...]
    owner: Player | None
    terminal: bool


class InfoStateKey(NamedTuple):
    player: Player
    key: bytes


COUNTER_CATEGORIES = ("regret_min", "best_response", "evaluation")


@dataclass
class NodeCounter:
    """Visited-node counters; the benchmark abscissa is ``reported``."""

    regret_min: int = 0
    best_response: int = 0
    evaluation: int = 0

    def visit(self, category: str, n: int = 1) -> "NodeCounter":
        if category not in COUNTER_CATEGORIES:
            raise ContractError(f"unknown counter category {category!r}")
        if n < 0:
            raise ContractError("counters never decrease")
        setattr(self, category, getattr(self, category) + int(n))
        return self

    @property
    def reported(self) -> int:
        return self.regret_min + self.best_response

    def copy(self) -> "NodeCounter":
        return NodeCounter(self.regret_min, self.best_response, self.evaluation)


def count_visit(counter: NodeCounter, category: str, n: int = 1) -> NodeCounter:
    return counter.visit(category, n)


def charge(counter: NodeCounter | None, category: str | None, n: int) -> None:
    if counter is not None and category is not None:
        counter.visit(category, n)


class GameTree(abc.ABC):
    """Two-player zero-sum extensive-form game defined by its rules.

    Subclasses implement the ``_``-prefixed rule hooks over an opaque state
    type. The public methods address nodes by :class:`HistoryRef` and replay
    the path from the root, so they are meant for inspection and tests; bulk
    work goes through :attr:`tree`.
    """

    name: str = "game"

    def __init__(self, **params: Any) -> None:
        self.params = dict(params)

    # -- rule hooks -------------------------------------------------------
    @abc.abstractmethod
    def _initial(self) -> Any: ...

    @abc.abstractmethod
    def _owner(self, state: Any) -> Player | None:
        """Player to act, ``Player.CHANCE``, or None at terminals."""

    @abc.abstractmethod
    def _actions(self, state: Any) -> Sequence[str]:
        """Action labels in canonical order; index = action id."""

    @abc.abstractmethod
    def _next(self, state: Any, action: int) -> Any: ...

    def _chance(self, state: Any) -> list[tuple[int, float]]:
        raise NotImplementedError

    @abc.abstractmethod
    def _payoff(self, state: Any) -> tuple[float, float]: ...

    @abc.abstractmethod
    def _infokey(self, state: Any) -> bytes: ...

    @property
    @abc.abstractmethod
    def utility_range(self) -> tuple[float, float]: ...

    # -- history interface ------------------------------------------------
    def _replay(self, path: Sequence[int]) -> Any:
        state = self._initial()
        for depth, a in enumerate(path):
            if self._owner(state) is None:
                raise StructuralError(f"path {tuple(path)} runs past a terminal at depth {depth}")
            n = len(self._actions(state))
            if not 0 <= a < n:
                raise StructuralError(f"action {a} illegal at depth {depth} of {tuple(path)}")
            state = self._next(state, a)
        return state

    def _ref(self, path: tuple[int, ...], state: Any) -> HistoryRef:
        owner = self._owner(state)
        return HistoryRef(path, owner, owner is None)

    @property
    def root(self) -> HistoryRef:
        return self._ref((), self._initial())

    def history(self, path: Sequence[int]) -> HistoryRef:
        path = tuple(path)
        return self._ref(path, self._replay(path))

    def child(self, h: HistoryRef, action: int) -> HistoryRef:
        return self.history(h.path + (action,))

    def legal_actions(self, h: HistoryRef) -> list[int]:
        state = self._replay(h.path)
        if self._owner(state) is None:
            return []
        return list(range(len(self._actions(state))))

    def action_labels(self, h: HistoryRef) -> list[str]:
        state = self._replay(h.path)
        return [] if self._owner(state) is None else list(self._actions(state))

    def chance_outcomes(self, h: HistoryRef) -> list[tuple[int, float]]:
        state = self._replay(h.path)
        if self._owner(state) is not Player.CHANCE:
            raise ContractError(f"history {h.path} is not a chance node")
        return list(self._chance(state))

    def payoff(self, z: HistoryRef, player: Player) -> float:
        state = self._replay(z.path)
        if self._owner(state) is not None:
            raise ContractError(f"history {z.path} is not terminal")
        if player not in (Player.P1, Player.P2):
            raise ContractError("chance never receives payoffs")
        return float(self._payoff(state)[int(player)])

    def infostate_key(self, h: HistoryRef) -> InfoStateKey:
        state = self._replay(h.path)
        owner = self._owner(state)
        if owner not in (Player.P1, Player.P2):
            raise ContractError(f"history {h.path} is not a decision node")
        return InfoStateKey(owner, self._infokey(state))

    def histories(self) -> Iterator[HistoryRef]:
        """Depth-first enumeration of every history in canonical order."""
        stack = [((), self._initial())]
        while stack:
            path, state = stack.pop()
            yield self._ref(path, state)
            if self._owner(state) is not None:
                n = len(self._actions(state))
                for a in reversed(range(n)):
                    stack.append((path + (a,), self._next(state, a)))

    # -- compiled view ----------------------------------------------------
    @cached_property
    def tree(self) -> "Tree":
        return Tree.compile(self)

    @property
    def mask(self) -> np.ndarray:
        return self.tree.full_mask

    def num_infostates(self, player: Player) -> int:
        return int(np.sum(self.tree.infoset_player == int(player)))

    @property
    def horizon(self) -> int:
        return self.tree.horizon

    def __repr__(self) -> str:
        args = ", ".join(f"{k}={v}" for k, v in sorted(self.params.items()))
        return f"{type(self).__name__}({args})"


@dataclass
class Tree:
    """Breadth-first arena of a game.

    Children of a node are contiguous and every depth level is a contiguous
    index range, so parents always precede children. Information states are
    numbered in order of discovery; because all histories of an information
    state sit at the same depth, the information states of one level form a
    contiguous id range, and their action slots form a contiguous slot range.
    """

    kind: np.ndarray            # int8, KIND_*
    parent: np.ndarray          # int64, -1 at root
    action: np.ndarray          # int64, action index taken at parent
    depth: np.ndarray           # int64
    first_child: np.ndarray     # int64, -1 at terminals
    num_children: np.ndarray    # int64
    infoset: np.ndarray         # int64, -1 off decision nodes
    edge_slot: np.ndarray       # int64, slot of the decision edge into node, else -1
    edge_owner: np.ndarray      # int8, kind of the parent, -1 at root
    chance_prob: np.ndarray     # float64, probability of a chance edge into node, else 1
    payoff: np.ndarray          # float64, P1 payoff at terminals
    level_starts: np.ndarray    # int64, len = n_levels + 1
    infoset_player: np.ndarray  # int8
    infoset_depth: np.ndarray   # int64
    slot_offset: np.ndarray     # int64, len = n_infosets + 1
    slot_infoset: np.ndarray    # int64
    slot_action: np.ndarray     # int64
    keys: list[bytes]
    action_labels: list[list[str]]
    key_index: dict[tuple[int, bytes], int] = field(repr=False)

    @property
    def n_nodes(self) -> int:
        return len(self.kind)

    @property
    def n_infosets(self) -> int:
        return len(self.infoset_player)

    @property
    def n_slots(self) -> int:
        return len(self.slot_infoset)

    @property
    def n_levels(self) -> int:
        return len(self.level_starts) - 1

    @cached_property
    def full_mask(self) -> np.ndarray:
        m = np.ones(self.n_slots, dtype=bool)
        m.flags.writeable = False
        return m

    @cached_property
    def infoset_num_actions(self) -> np.ndarray:
        return np.diff(self.slot_offset)

    @cached_property
    def infoset_level_range(self) -> list[tuple[int, int]]:
        """Per level, the [lo, hi) range of information-state ids first seen there."""
        out = []
        for d in range(self.n_levels):
            lo = int(np.searchsorted(self.infoset_depth, d, side="left"))
            hi = int(np.searchsorted(self.infoset_depth, d, side="right"))
            out.append((lo, hi))
        return out

    @cached_property
    def horizon(self) -> int:
        return int(self.decision_depth.max())

    @cached_property
    def decision_depth(self) -> np.ndarray:
        """Number of decision nodes strictly above each node, plus itself if deciding."""
        return self.decision_depth_in(self.full_mask)[0]

    def decision_depth_in(self, mask: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        inside = self.in_tree(mask)
        dd = np.zeros(self.n_nodes, dtype=np.int64)
        is_dec = self.kind <= KIND_P2
        dd[0] = int(is_dec[0])
        for d in range(1, self.n_levels):
            lo, hi = self.level_starts[d], self.level_starts[d + 1]
            dd[lo:hi] = dd[self.parent[lo:hi]] + is_dec[lo:hi]
        return dd, inside

    def levels(self) -> Iterator[tuple[int, int]]:
        for d in range(self.n_levels):
            yield int(self.level_starts[d]), int(self.level_starts[d + 1])

    def slot(self, infoset: int, action: int) -> int:
        return int(self.slot_offset[infoset] + action)

    def infoset_of(self, key: InfoStateKey | tuple[int, bytes]) -> int:
        return self.key_index[(int(key[0]), key[1])]

    def info_key(self, infoset: int) -> InfoStateKey:
        return InfoStateKey(Player(int(self.infoset_player[infoset])), self.keys[infoset])

    def in_tree(self, mask: np.ndarray) -> np.ndarray:
        """Nodes reachable from the root using only allowed decision edges."""
        if mask is self.full_mask:
            return self._all_nodes
        inside = np.empty(self.n_nodes, dtype=bool)
        inside[0] = True
        allowed_edge = np.where(self.edge_slot >= 0, mask[np.maximum(self.edge_slot, 0)], True)
        for d in range(1, self.n_levels):
            lo, hi = self.level_starts[d], self.level_starts[d + 1]
            inside[lo:hi] = inside[self.parent[lo:hi]] & allowed_edge[lo:hi]
        return inside

    @cached_property
    def _all_nodes(self) -> np.ndarray:
        a = np.ones(self.n_nodes, dtype=bool)
        a.flags.writeable = False
        return a

    @cached_property
    def py(self) -> "_PyTree":
        return _PyTree(self)

    # -- construction -----------------------------------------------------
    @classmethod
    def compile(cls, game: GameTree) -> "Tree":
        kind: list[int] = []
        parent: list[int] = []
        action: list[int] = []
        depth: list[int] = []
        first_child: list[int] = []
        num_children: list[int] = []
        infoset: list[int] = []
        edge_slot: list[int] = []
        edge_owner: list[int] = []
        chance_prob: list[float] = []
        payoff: list[float] = []
        level_starts: list[int] = []
        iset_player: list[int] = []
        iset_depth: list[int] = []
        iset_nact: list[int] = []
        keys: list[bytes] = []
        labels: list[list[str]] = []
        key_index: dict[tuple[int, bytes], int] = {}

        u_lo, u_hi = game.utility_range
        frontier: deque = deque([(game._initial(), -1, -1, 1.0)])
        level = 0
        while frontier:
            level_starts.append(len(kind))
            nxt: deque = deque()
            for state, par, act, cprob in frontier:
                idx = len(kind)
                owner = game._owner(state)
                parent.append(par)
                action.append(act)
                depth.append(level)
                chance_prob.append(cprob)
                pk = kind[par] if par >= 0 else -1
                edge_owner.append(pk)
                if pk in (KIND_P1, KIND_P2):
                    edge_slot.append(-2)  # resolved below once slot offsets are known
                else:
                    edge_slot.append(-1)
                if owner is None:
                    u = game._payoff(state)
                    if abs(u[0] + u[1]) > ZERO_SUM_TOL:
                        raise StructuralError(f"terminal {idx} is not zero-sum: {u}")
                    if not (u_lo - 1e-9 <= u[0] <= u_hi + 1e-9):
                        raise StructuralError(f"terminal {idx} payoff {u[0]} outside utility range")
                    kind.append(KIND_TERMINAL)
                    payoff.append(float(u[0]))
                    infoset.append(-1)
                    first_child.append(-1)
                    num_children.append(0)
                    continue
                payoff.append(0.0)
                acts = list(game._actions(state))
                if not acts:
                    raise StructuralError(f"non-terminal node {idx} has no actions")
                if owner is Player.CHANCE:
                    kind.append(KIND_CHANCE)
                    infoset.append(-1)
                    outcomes = game._chance(state)
                    probs = dict(outcomes)
                    total = sum(probs.values())
                    if abs(total - 1.0) > CHANCE_TOL or any(p <= 0 for p in probs.values()):
                        raise StructuralError(f"chance node {idx} distribution invalid (sum {total})")
                    if sorted(probs) != list(range(len(acts))):
                        raise StructuralError(f"chance node {idx} must give every outcome a probability")
                    children = [(game._next(state, a), idx, a, probs[a]) for a in range(len(acts))]
                else:
                    kind.append(int(owner))
                    k = (int(owner), game._infokey(state))
                    iid = key_index.get(k)
                    if iid is None:
                        iid = len(keys)
                        key_index[k] = iid
                        keys.append(k[1])
                        labels.append(acts)
                        iset_player.append(int(owner))
                        iset_depth.append(level)
                        iset_nact.append(len(acts))
                    elif iset_nact[iid] != len(acts) or iset_depth[iid] != level:
                        raise StructuralError(
                            f"information state {k} mixes action counts or depths")
                    infoset.append(iid)
                    children = [(game._next(state, a), idx, a, 1.0) for a in range(len(acts))]
                first_child.append(-3)  # filled when children are numbered
                num_children.append(len(children))
                nxt.extend(children)
            frontier = nxt
            level += 1
        level_starts.append(len(kind))

        n = len(kind)
        kind_a = np.asarray(kind, dtype=np.int8)
        parent_a = np.asarray(parent, dtype=np.int64)
        nch = np.asarray(num_children, dtype=np.int64)
        # BFS numbering: children of node i start after the children of all earlier nodes
        fc = np.full(n, -1, dtype=np.int64)
        has = nch > 0
        starts = 1 + np.concatenate([[0], np.cumsum(nch)[:-1]])
        fc[has] = starts[has]
        slot_offset = np.concatenate([[0], np.cumsum(iset_nact)]).astype(np.int64)
        infoset_a = np.asarray(infoset, dtype=np.int64)
        action_a = np.asarray(action, dtype=np.int64)
        es = np.asarray(edge_slot, dtype=np.int64)
        dec_edge = es == -2
        es[dec_edge] = slot_offset[infoset_a[parent_a[dec_edge]]] + action_a[dec_edge]
        n_slots = int(slot_offset[-1])
        slot_infoset = np.repeat(np.arange(len(keys), dtype=np.int64), iset_nact)
        slot_action = np.arange(n_slots, dtype=np.int64) - slot_offset[slot_infoset]
        return cls(
            kind=kind_a,
            parent=parent_a,
            action=action_a,
            depth=np.asarray(depth, dtype=np.int64),
            first_child=fc,
            num_children=nch,
            infoset=infoset_a,
            edge_slot=es,
            edge_owner=np.asarray(edge_owner, dtype=np.int8),
            chance_prob=np.asarray(chance_prob, dtype=np.float64),
            payoff=np.asarray(payoff, dtype=np.float64),
            level_starts=np.asarray(level_starts, dtype=np.int64),
            infoset_player=np.asarray(iset_player, dtype=np.int8),
            infoset_depth=np.asarray(iset_depth, dtype=np.int64),
            slot_offset=slot_offset,
            slot_infoset=slot_infoset,
            slot_action=slot_action,
            keys=keys,
            action_labels=labels,
            key_index=key_index,
        )

    # -- checks -----------------------------------------------------------
    def check_perfect_recall(self) -> None:
        """Every history of an information state shares its owner's last own slot."""
        last = np.full((2, self.n_nodes), -1, dtype=np.int64)
        for d in range(1, self.n_levels):
            lo, hi = self.level_starts[d], self.level_starts[d + 1]
            par = self.parent[lo:hi]
            last[:, lo:hi] = last[:, par]
            own = self.edge_owner[lo:hi]
            for p in (0, 1):
                sel = own == p
                idx = np.arange(lo, hi)[sel]
                last[p, idx] = self.edge_slot[idx]
        seen: dict[int, int] = {}
        dec = np.flatnonzero(self.kind <= KIND_P2)
        for node in dec:
            iid = int(self.infoset[node])
            p = int(self.kind[node])
            prev = seen.setdefault(iid, int(last[p, node]))
            if prev != last[p, node]:
                raise StructuralError(f"perfect recall violated at information state {self.keys[iid]!r}")


class _PyTree:
    """Plain-list mirror of a Tree for per-node Python loops (sampling)."""

    def __init__(self, t: Tree) -> None:
        self.kind = t.kind.tolist()
        self.first_child = t.first_child.tolist()
        self.num_children = t.num_children.tolist()
        self.infoset = t.infoset.tolist()
        self.slot_offset = t.slot_offset.tolist()
        self.payoff = t.payoff.tolist()
        self.chance_prob = t.chance_prob.tolist()
        self.chance_cum: dict[int, list[float]] = {}
        for node in np.flatnonzero(t.kind == KIND_CHANCE).tolist():
            f = self.first_child[node]
            probs = self.chance_prob[f:f + self.num_children[node]]
            self.chance_cum[node] = np.cumsum(probs).tolist()
