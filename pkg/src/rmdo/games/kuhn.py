"""Kuhn poker and the large-stack variant with a choice of bet size."""

from __future__ import annotations

from ..core import GameTree, Player

CARD_NAMES = "JQKA23456789T"


class KuhnPoker(GameTree):
    """One betting round, ante 1, no re-raise.

    With ``stack=2`` this is standard Kuhn poker (single bet size of 1,
    actions labelled pass/bet). A larger stack lets the first bettor pick
    any integer bet in ``1..stack-1``; the player facing a bet may only fold
    or call.
    """

    name = "kuhn"

    def __init__(self, cards: int = 3, stack: int = 2) -> None:
        super().__init__(cards=cards, stack=stack)
        self.cards = cards
        self.max_bet = stack - 1
        if self.max_bet == 1:
            self._open = ["pass", "bet"]
            self._respond = ["pass", "bet"]
        else:
            self._open = ["check"] + [f"bet{b}" for b in range(1, self.max_bet + 1)]
            self._respond = ["fold", "call"]

    @property
    def utility_range(self) -> tuple[float, float]:
        return (-(1.0 + self.max_bet), 1.0 + self.max_bet)

    # state: (dealt cards tuple, betting tuple); a bet of size b is stored as b,
    # a check/pass as 0, and a response as 0 (fold) / 1 (call).
    def _initial(self):
        return ((), ())

    def _owner(self, state):
        dealt, bets = state
        if len(dealt) < 2:
            return Player.CHANCE
        if bets in ((), (0,)):
            return Player.P1 if not bets else Player.P2
        if len(bets) == 1:  # P1 opened with a bet
            return Player.P2
        if len(bets) == 2 and bets[0] == 0 and bets[1] > 0:
            return Player.P1
        return None

    def _remaining(self, dealt):
        return [c for c in range(self.cards) if c not in dealt]

    def _actions(self, state):
        dealt, bets = state
        if len(dealt) < 2:
            return [CARD_NAMES[c] for c in self._remaining(dealt)]
        if bets in ((), (0,)):
            return self._open
        return self._respond

    def _chance(self, state):
        rem = self._remaining(state[0])
        return [(i, 1.0 / len(rem)) for i in range(len(rem))]

    def _next(self, state, action):
        dealt, bets = state
        if len(dealt) < 2:
            return (dealt + (self._remaining(dealt)[action],), bets)
        return (dealt, bets + (action,))

    def _payoff(self, state):
        (c1, c2), bets = state
        winner = 1.0 if c1 > c2 else -1.0
        if bets == (0, 0):
            u = winner
        elif len(bets) == 2:  # opening bet answered
            b, r = bets
            u = winner * (1 + b) if r == 1 else 1.0
        else:  # check, bet, response
            _, b, r = bets
            u = winner * (1 + b) if r == 1 else -1.0
        return (u, -u)

    def _infokey(self, state):
        dealt, bets = state
        player = len(bets) % 2
        card = CARD_NAMES[dealt[player]]
        return f"{card}|{'.'.join(map(str, bets))}".encode()


def kuhn(cards: int = 3) -> KuhnPoker:
    g = KuhnPoker(cards=cards, stack=2)
    g.name = "kuhn"
    return g


def large_kuhn(stack: int = 40, cards: int = 3) -> KuhnPoker:
    g = KuhnPoker(cards=cards, stack=stack)
    g.name = "large_kuhn"
    return g
