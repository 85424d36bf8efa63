"""Oshi Zumo with simultaneous bids encoded by hiding the pending bid."""

from __future__ import annotations

from ..core import GameTree, Player


class OshiZumo(GameTree):
    """Both players start with ``coins``; the token starts mid-board.

    The board has ``2*size + 1`` cells. Each round P1 bids, then P2 bids
    without seeing P1's pending bid. The higher bid moves the token one cell
    toward the opponent; spent coins are gone. A player holding coins must bid
    at least ``min_bid``; with no coins the only bid is 0. The game ends when
    the token leaves the board (+1 to the pusher) or when both players are
    out of coins. At that point, with ``positional=1`` the player on whose
    opponent's half the token rests wins; otherwise the result is a draw.
    """

    name = "oshi_zumo"

    def __init__(self, coins: int = 4, size: int = 6, min_bid: int = 1, positional: int = 1) -> None:
        super().__init__(coins=coins, size=size, min_bid=min_bid, positional=positional)
        self.coins = coins
        self.size = size
        self.min_bid = min_bid
        self.positional = bool(positional)

    @property
    def board_length(self) -> int:
        return 2 * self.size + 1

    @property
    def utility_range(self) -> tuple[float, float]:
        return (-1.0, 1.0)

    # state: (coins1, coins2, position, pending P1 bid or None, past bid pairs)
    def _initial(self):
        return (self.coins, self.coins, self.size, None, ())

    def _over(self, state) -> bool:
        c1, c2, pos, pending, _ = state
        return pending is None and (pos < 0 or pos > 2 * self.size or (c1 == 0 and c2 == 0))

    def _owner(self, state):
        if self._over(state):
            return None
        return Player.P1 if state[3] is None else Player.P2

    def _bids(self, coins: int) -> list[int]:
        if coins == 0:
            return [0]
        return list(range(self.min_bid, coins + 1))

    def _actions(self, state):
        c1, c2, _, pending, _ = state
        return [str(b) for b in self._bids(c1 if pending is None else c2)]

    def _next(self, state, action):
        c1, c2, pos, pending, past = state
        if pending is None:
            return (c1, c2, pos, self._bids(c1)[action], past)
        b1, b2 = pending, self._bids(c2)[action]
        pos += (b1 > b2) - (b1 < b2)
        return (c1 - b1, c2 - b2, pos, None, past + ((b1, b2),))

    def _payoff(self, state):
        pos = state[2]
        if pos > 2 * self.size:
            u = 1.0
        elif pos < 0:
            u = -1.0
        elif self.positional:
            u = float((pos > self.size) - (pos < self.size))
        else:
            u = 0.0
        return (u, -u)

    def _infokey(self, state):
        _, _, _, pending, past = state
        hist = ";".join(f"{a},{b}" for a, b in past)
        # P2's key omits the pending bid, so it cannot see P1's current choice
        return hist.encode()
