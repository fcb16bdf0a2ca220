"""Leduc poker.

Six cards (two copies each of three ranks), one private card per player,
unit antes.  Two betting rounds with a single raise allowed per round; the
bet and raise amounts are 2 in the first round and 4 in the second.  Between
the rounds one community card is revealed; at showdown a pair with the
community card wins, otherwise the higher rank, ties split.  Utilities lie
in [-13, 13].

History: (cards, community, seq1, seq2); cards are concrete (rank, copy)
pairs so the deal posterior stays exact, observations use ranks only.
The first player acts first in both rounds.
"""

from __future__ import annotations

from dataclasses import dataclass

RANKS = ("J", "Q", "K")
DECK = tuple((r, i) for r in RANKS for i in (0, 1))

ROUND_DONE = ("kk", "kbc", "kbrc", "bc", "brc")
ROUND_FOLD = ("kbf", "kbrf", "bf", "brf")

_LETTER = {"check": "k", "bid": "b", "call": "c", "raise": "r", "fold": "f"}


def _round_contrib(seq: str, bet: float) -> tuple[float, float]:
    """Per-player chips put in during a round with the given bet size."""
    c = [0.0, 0.0]
    level = 0.0
    turn = 0
    for ch in seq:
        if ch == "b":
            level = bet
            c[turn] = level
        elif ch == "r":
            level += bet
            c[turn] = level
        elif ch == "c":
            c[turn] = level
        turn ^= 1
    return c[0], c[1]


@dataclass(frozen=True)
class LeducGame:
    game_id: str = "leduc"
    u_min: float = -13.0
    u_max: float = 13.0
    action_names: tuple[str, ...] = ("check", "bid", "call", "raise", "fold")
    horizon: int = 4
    bets: tuple[float, float] = (2.0, 4.0)

    def root_history(self):
        return (None, None, "", "")

    def kind(self, h) -> str:
        cards, comm, seq1, seq2 = h
        if cards is None:
            return "chance"
        if seq1 in ROUND_FOLD or seq2 in ROUND_FOLD:
            return "terminal"
        if seq1 in ROUND_DONE:
            if comm is None:
                return "chance"
            if seq2 in ROUND_DONE:
                return "terminal"
            return "x" if len(seq2) % 2 == 0 else "o"
        return "x" if len(seq1) % 2 == 0 else "o"

    def chance_outcomes(self, h):
        cards, comm, seq1, seq2 = h
        if cards is None:
            n = len(DECK) * (len(DECK) - 1)
            return [
                (1.0 / n, ((cx, co), None, "", ""))
                for cx in DECK
                for co in DECK
                if co != cx
            ]
        remaining = [c for c in DECK if c not in cards]
        return [
            (1.0 / len(remaining), (cards, c, seq1, seq2)) for c in remaining
        ]

    def _round_seq(self, h) -> str:
        cards, comm, seq1, seq2 = h
        return seq2 if seq1 in ROUND_DONE else seq1

    def legal_actions(self, h):
        seq = self._round_seq(h)
        if seq.endswith("r"):
            return ("call", "fold")
        if seq.endswith("b"):
            return ("call", "raise", "fold")
        return ("check", "bid")

    def apply(self, h, action):
        cards, comm, seq1, seq2 = h
        letter = _LETTER[action]
        if seq1 in ROUND_DONE:
            return (cards, comm, seq1, seq2 + letter)
        return (cards, comm, seq1 + letter, seq2)

    def _me(self, h) -> int:
        return 0 if len(self._round_seq(h)) % 2 == 0 else 1

    def infoset_key(self, h) -> str:
        cards, comm, seq1, seq2 = h
        me = self._me(h)
        if seq1 in ROUND_DONE:
            return f"{cards[me][0]}:{seq1}/{comm[0]}:{seq2}"
        return f"{cards[me][0]}:{seq1}"

    def terminal_key(self, h, role: str) -> str:
        cards, comm, seq1, seq2 = h
        me = 0 if role == "x" else 1
        if seq1 in ROUND_FOLD:
            return f"{cards[me][0]}:{seq1}"
        return f"{cards[me][0]}:{seq1}/{comm[0]}:{seq2}"

    def utility_x(self, h) -> float:
        cards, comm, seq1, seq2 = h
        c1 = _round_contrib(seq1, self.bets[0])
        c2 = _round_contrib(seq2, self.bets[1])
        total_x = 1.0 + c1[0] + c2[0]
        total_o = 1.0 + c1[1] + c2[1]
        if seq1 in ROUND_FOLD or seq2 in ROUND_FOLD:
            seq = seq1 if seq1 in ROUND_FOLD else seq2
            x_folded = (len(seq) - 1) % 2 == 0
            return -total_x if x_folded else total_o
        rx, ro = cards[0][0], cards[1][0]
        comm_rank = comm[0]
        x_pair, o_pair = rx == comm_rank, ro == comm_rank
        if x_pair and not o_pair:
            return total_o
        if o_pair and not x_pair:
            return -total_x
        if rx == ro:
            return 0.0
        order = RANKS.index
        return total_o if order(rx) > order(ro) else -total_x


LEDUC = LeducGame()
