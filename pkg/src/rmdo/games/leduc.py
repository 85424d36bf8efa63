"""Leduc hold'em and its 10-card and duplicated-action variants."""

from __future__ import annotations

from ..core import GameTree, Player

RANK_NAMES = "23456789TJQK"
SUITS = "sh"


class LeducPoker(GameTree):
    """Two betting rounds with one private and one public card.

    ``ranks`` ranks in two suits; ante 1; raise sizes ``bet1`` then ``bet2``;
    at most ``max_raises`` bets per round; player 1 opens both rounds. A pair
    with the public card wins the showdown, otherwise the higher rank.
    With ``dummy=1`` every decision action appears twice (the copy has its
    own index and leads to the same successor state).
    """

    name = "leduc"

    def __init__(self, ranks: int = 3, bet1: int = 2, bet2: int = 4,
                 max_raises: int = 2, dummy: int = 0) -> None:
        super().__init__(ranks=ranks, bet1=bet1, bet2=bet2, max_raises=max_raises, dummy=dummy)
        self.ranks = ranks
        self.deck = 2 * ranks
        self.bets = (bet1, bet2)
        self.max_raises = max_raises
        self.dummy = bool(dummy)

    @property
    def utility_range(self) -> tuple[float, float]:
        hi = 1 + self.max_raises * (self.bets[0] + self.bets[1])
        return (-float(hi), float(hi))

    # state: (dealt cards tuple, round sequences tuple); a move is one of 'f', 'c', 'r'
    def _initial(self):
        return ((), ((),))

    @staticmethod
    def _round_over(seq) -> bool:
        return len(seq) >= 2 and seq[-1].lower() == "c"

    def _rank(self, card: int) -> str:
        return RANK_NAMES[len(RANK_NAMES) - self.ranks + card // 2]

    def _phase(self, state):
        dealt, rounds = state
        if len(dealt) < 2:
            return "deal"
        seq = rounds[-1]
        if seq and seq[-1].lower() == "f":
            return "end"
        if self._round_over(seq):
            if len(rounds) == 2:
                return "end"
            return "public" if len(dealt) == 2 else "bet"
        return "bet"

    def _owner(self, state):
        phase = self._phase(state)
        if phase in ("deal", "public"):
            return Player.CHANCE
        if phase == "end":
            return None
        return Player(len(state[1][-1]) % 2)

    def _moves(self, seq) -> list[str]:
        seq = [m.lower() for m in seq]
        raises = seq.count("r")
        facing = raises > 0 and seq[-1] == "r"
        moves = ["f", "c"] if facing else ["c"]
        if raises < self.max_raises:
            moves.append("r")
        return moves

    def _legal(self, state) -> list[str]:
        moves = self._moves(state[1][-1])
        if self.dummy:
            return [m for m in moves for _ in (0, 1)]
        return moves

    def _remaining(self, dealt):
        return [c for c in range(self.deck) if c not in dealt]

    def _actions(self, state):
        phase = self._phase(state)
        if phase in ("deal", "public"):
            return [self._rank(c) + SUITS[c % 2] for c in self._remaining(state[0])]
        names = {"f": "fold", "c": "call", "r": "raise"}
        legal = self._legal(state)
        if not self.dummy:
            return [names[m] for m in legal]
        return [names[m] + ("" if i % 2 == 0 else "'") for i, m in enumerate(legal)]

    def _chance(self, state):
        rem = self._remaining(state[0])
        return [(i, 1.0 / len(rem)) for i in range(len(rem))]

    def _next(self, state, action):
        dealt, rounds = state
        phase = self._phase(state)
        if phase in ("deal", "public"):
            dealt = dealt + (self._remaining(dealt)[action],)
            if phase == "public":
                rounds = rounds + ((),)
            return (dealt, rounds)
        move = self._legal(state)[action]
        # a duplicated copy is recorded in upper case so the history differs
        if self.dummy and action % 2 == 1:
            move = move.upper()
        return (dealt, rounds[:-1] + (rounds[-1] + (move,),))

    def _contributions(self, rounds):
        contrib = [1, 1]
        for r, seq in enumerate(rounds):
            for i, m in enumerate(seq):
                p = i % 2
                m = m.lower()
                if m == "c":
                    contrib[p] = contrib[1 - p]
                elif m == "r":
                    contrib[p] = contrib[1 - p] + self.bets[r]
        return contrib

    def _payoff(self, state):
        dealt, rounds = state
        norm = tuple(tuple(m.lower() for m in seq) for seq in rounds)
        contrib = self._contributions(rounds)
        last = norm[-1]
        if last and last[-1] == "f":
            folder = (len(last) - 1) % 2
            u = -contrib[0] if folder == 0 else contrib[1]
            return (float(u), float(-u))
        r1, r2, pub = dealt[0] // 2, dealt[1] // 2, dealt[2] // 2
        s1 = (2, r1) if r1 == pub else (1, r1)
        s2 = (2, r2) if r2 == pub else (1, r2)
        if s1 == s2:
            return (0.0, 0.0)
        u = contrib[1] if s1 > s2 else -contrib[0]
        return (float(u), float(-u))

    def _infokey(self, state):
        dealt, rounds = state
        player = len(rounds[-1]) % 2
        priv = self._rank(dealt[player])
        pub = self._rank(dealt[2]) if len(dealt) > 2 else "-"
        hist = "/".join("".join(seq) for seq in rounds)
        return f"{priv}{pub}|{hist}".encode()


def leduc(ranks: int = 3, bet1: int = 2, bet2: int = 4, max_raises: int = 2) -> LeducPoker:
    return LeducPoker(ranks=ranks, bet1=bet1, bet2=bet2, max_raises=max_raises)


def leduc10(ranks: int = 5, bet1: int = 2, bet2: int = 4, max_raises: int = 2) -> LeducPoker:
    g = LeducPoker(ranks=ranks, bet1=bet1, bet2=bet2, max_raises=max_raises)
    g.name = "leduc10"
    return g


def leduc_dummy(ranks: int = 3, bet1: int = 2, bet2: int = 4, max_raises: int = 2) -> LeducPoker:
    g = LeducPoker(ranks=ranks, bet1=bet1, bet2=bet2, max_raises=max_raises, dummy=1)
    g.name = "leduc_dummy"
    return g
