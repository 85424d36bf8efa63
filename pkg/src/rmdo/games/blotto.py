"""Sequential perfect-information Colonel Blotto."""

from __future__ import annotations

from ..core import ConfigError, GameTree, Player


class SequentialBlotto(GameTree):
    """Players alternately commit forces of distinct strengths ``0..forces-1``.

    Deployments go P1, P2, P1, P2, ...; each consecutive pair is one fight
    scored as P1 strength minus P2 strength (or its sign when ``sign=1``).
    Every force can be used once. The payoff is the sum over fights.
    """

    name = "blotto"

    def __init__(self, forces: int = 20, rounds: int = 2, sign: int = 0) -> None:
        super().__init__(forces=forces, rounds=rounds, sign=sign)
        if rounds > forces:
            raise ConfigError(f"blotto needs rounds <= forces, got rounds={rounds}, forces={forces}")
        self.forces = forces
        self.rounds = rounds
        self.sign = bool(sign)

    @property
    def utility_range(self) -> tuple[float, float]:
        hi = float(self.rounds if self.sign else self.rounds * (self.forces - 1))
        return (-hi, hi)

    # state: tuple of deployed strengths in play order
    def _initial(self):
        return ()

    def _owner(self, state):
        if len(state) == 2 * self.rounds:
            return None
        return Player(len(state) % 2)

    def _available(self, state):
        used = state[len(state) % 2::2]
        return [f for f in range(self.forces) if f not in used]

    def _actions(self, state):
        return [str(f) for f in self._available(state)]

    def _next(self, state, action):
        return state + (self._available(state)[action],)

    def _payoff(self, state):
        u = 0.0
        for a, b in zip(state[0::2], state[1::2]):
            d = a - b
            u += (d > 0) - (d < 0) if self.sign else d
        return (float(u), float(-u))

    def _infokey(self, state):
        return ".".join(map(str, state)).encode()
