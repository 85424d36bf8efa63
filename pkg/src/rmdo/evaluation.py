"""Exact expected value, best response, exploitability and support metrics."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .core import KIND_TERMINAL, ContractError, InfoStateKey, NodeCounter, Player, Tree, charge
from .regret import edge_probabilities, reach_split

PROB_TOL = 1e-9


@dataclass
class BestResponseResult:
    policy: np.ndarray  # per slot; 1.0 on the chosen action of each responder state
    value: float
    responder: int = 0

    def actions(self, tree: Tree) -> dict[int, int]:
        """Chosen action per responder information state id."""
        chosen = np.flatnonzero(self.policy > 0)
        return {int(tree.slot_infoset[s]): int(tree.slot_action[s]) for s in chosen}


@dataclass
class SupportReport:
    min_pct: float
    avg_pct: float
    mean_ratio: float
    per_infostate: dict[InfoStateKey, int] = field(repr=False)
    degenerate: bool = False


def _check_complete(tree: Tree, policy: np.ndarray, inside: np.ndarray, players) -> None:
    nodes = np.flatnonzero(inside & np.isin(tree.kind, players))
    if nodes.size == 0:
        return
    isets = np.unique(tree.infoset[nodes])
    sums = np.add.reduceat(policy, tree.slot_offset[:-1])[isets]
    bad = np.abs(sums - 1.0) > PROB_TOL
    if bad.any() or np.any(policy < -PROB_TOL):
        k = tree.keys[int(isets[np.argmax(bad)])]
        raise ContractError(f"policy incomplete at information state {k!r}")


def expected_value(view, policy: np.ndarray, player: Player | int,
                   counter: NodeCounter | None = None, category: str | None = "evaluation") -> float:
    """Expected payoff of ``player`` when both players follow ``policy``."""
    tree: Tree = view.tree
    inside = tree.in_tree(view.mask)
    _check_complete(tree, policy, inside, (0, 1))
    edge_p = edge_probabilities(tree, policy)
    own, oth = reach_split(tree, edge_p, 0, inside)
    term = tree.kind == KIND_TERMINAL
    v1 = float(np.sum(own[term] * oth[term] * tree.payoff[term]))
    charge(counter, category, int(inside.sum()))
    return v1 if int(player) == 0 else -v1


def best_response(view, opponent: np.ndarray, responder: Player | int,
                  counter: NodeCounter | None = None, category: str | None = "best_response"
                  ) -> BestResponseResult:
    """Pure best response of ``responder`` to the opponent part of ``opponent``.

    Backward induction over levels: at each responder state the action value
    is the opponent-and-chance-reach weighted sum over its histories; the
    maximizing allowed action wins, ties going to the lowest action index.
    """
    tree: Tree = view.tree
    mask = view.mask
    r = int(responder)
    inside = tree.in_tree(mask)
    _check_complete(tree, opponent, inside, (1 - r,))
    edge_p = edge_probabilities(tree, opponent)
    _, oth = reach_split(tree, edge_p, r, inside)
    sign = 1.0 if r == 0 else -1.0
    v = np.where(tree.kind == KIND_TERMINAL, sign * tree.payoff, 0.0)
    br = np.zeros(tree.n_slots)
    best_action = np.zeros(tree.n_infosets, dtype=np.int64)
    levels = list(tree.levels())
    for d in range(len(levels) - 2, -1, -1):
        lo, hi = levels[d]
        clo, chi = levels[d + 1]
        ch = np.arange(clo, chi)
        mine = tree.edge_owner[ch] == r
        w = np.where(mine, 0.0, edge_p[ch]) * inside[ch]
        sums = np.bincount(tree.parent[ch] - lo, weights=w * v[ch], minlength=hi - lo)
        ilo, ihi = tree.infoset_level_range[d]
        if ihi > ilo:
            slo, shi = int(tree.slot_offset[ilo]), int(tree.slot_offset[ihi])
            cr = ch[mine & inside[ch]]
            q = np.bincount(tree.edge_slot[cr] - slo, weights=oth[tree.parent[cr]] * v[cr],
                            minlength=shi - slo)
            qm = np.where(mask[slo:shi], q, -np.inf)
            starts = tree.slot_offset[ilo:ihi] - slo
            seg_max = np.maximum.reduceat(qm, starts)
            seg_of = tree.slot_infoset[slo:shi] - ilo
            is_max = (qm == seg_max[seg_of]) & mask[slo:shi]
            hits = np.flatnonzero(is_max)
            first_seg, first_idx = np.unique(seg_of[hits], return_index=True)
            iset_ids = first_seg + ilo
            acts = tree.slot_action[hits[first_idx] + slo]
            best_action[iset_ids] = acts
            nodes_r = np.arange(lo, hi)
            nodes_r = nodes_r[(tree.kind[lo:hi] == r) & inside[lo:hi]]
            used = np.unique(tree.infoset[nodes_r])
            br[tree.slot_offset[used] + best_action[used]] = 1.0
        else:
            nodes_r = np.empty(0, dtype=np.int64)
        internal = (tree.kind[lo:hi] != KIND_TERMINAL)
        v[lo:hi] = np.where(internal, sums, v[lo:hi])
        if nodes_r.size:
            v[nodes_r] = v[tree.first_child[nodes_r] + best_action[tree.infoset[nodes_r]]]
    charge(counter, category, int(inside.sum()))
    return BestResponseResult(br, float(v[0]), r)


def exploitability(view, policy: np.ndarray, counter: NodeCounter | None = None,
                   category: str | None = "evaluation", halved: bool = False) -> float:
    """Sum over players of best-response value against ``policy`` (NashConv).

    In a zero-sum game the on-policy values cancel, so this equals the sum of
    the two best-response values. ``halved`` divides by two.
    """
    e = sum(best_response(view, policy, p, counter, category).value for p in (0, 1))
    return e / 2 if halved else e


def support_metrics(policy: np.ndarray, game, threshold: float = 1e-9) -> SupportReport:
    """Minimum and average support percentages over every information state.

    ``avg_pct`` pools actions (total support over total action count);
    ``mean_ratio`` is the unweighted mean of per-state ratios.
    """
    if threshold < 0:
        raise ContractError("threshold must be >= 0")
    tree: Tree = game.tree
    positive = (policy > threshold).astype(np.int64)
    supp = np.add.reduceat(positive, tree.slot_offset[:-1])
    nact = tree.infoset_num_actions
    ratios = supp / nact
    per = {tree.info_key(i): int(supp[i]) for i in range(tree.n_infosets)}
    degenerate = bool(np.any(supp == 0))
    return SupportReport(
        min_pct=float(ratios.min()),
        avg_pct=float(supp.sum() / nact.sum()),
        mean_ratio=float(ratios.mean()),
        per_infostate=per,
        degenerate=degenerate,
    )
