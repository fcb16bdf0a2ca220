"""Kuhn poker, 3-card and 5-card variants.

One card each from a single deck, one betting round with unit antes and a
unit bet: first player checks or bids; a bid is answered by call or fold; a
check-check goes to showdown.  Utilities lie in [-2, 2].

History: (cards, seq) where cards is the ordered deal (x's card, o's card)
or None before the deal, and seq is the action-letter sequence (k=check,
b=bid, c=call, f=fold).
"""

from __future__ import annotations

from dataclasses import dataclass

TERMINAL_SEQS = ("kk", "kbc", "kbf", "bc", "bf")

_LETTER = {"check": "k", "bid": "b", "call": "c", "fold": "f"}


@dataclass(frozen=True)
class KuhnGame:
    cards: tuple[str, ...]  # rank order, low to high
    game_id: str
    u_min: float = -2.0
    u_max: float = 2.0
    action_names: tuple[str, ...] = ("check", "bid", "call", "fold")
    horizon: int = 2

    def root_history(self):
        return (None, "")

    def kind(self, h) -> str:
        cards, seq = h
        if cards is None:
            return "chance"
        if seq in TERMINAL_SEQS:
            return "terminal"
        return "x" if len(seq) % 2 == 0 else "o"

    def chance_outcomes(self, h):
        p = 1.0 / (len(self.cards) * (len(self.cards) - 1))
        return [
            (p, ((cx, co), ""))
            for cx in self.cards
            for co in self.cards
            if co != cx
        ]

    def legal_actions(self, h):
        _, seq = h
        if seq.endswith("b"):
            return ("call", "fold")
        return ("check", "bid")

    def apply(self, h, action):
        cards, seq = h
        return (cards, seq + _LETTER[action])

    def infoset_key(self, h) -> str:
        cards, seq = h
        me = 0 if len(seq) % 2 == 0 else 1
        return f"{cards[me]}:{seq}"

    def terminal_key(self, h, role: str) -> str:
        cards, seq = h
        me = 0 if role == "x" else 1
        return f"{cards[me]}:{seq}"

    def utility_x(self, h) -> float:
        cards, seq = h
        cx, co = cards
        if seq == "bf":
            return 1.0
        if seq == "kbf":
            return -1.0
        stake = 2.0 if seq in ("kbc", "bc") else 1.0
        rank = self.cards.index
        return stake if rank(cx) > rank(co) else -stake


KUHN3 = KuhnGame(cards=("J", "Q", "K"), game_id="kuhn3")
KUHN5 = KuhnGame(cards=("T", "J", "Q", "K", "A"), game_id="kuhn5")


def nash_strategy(opponent_role: str, alpha: float):
    """Closed-form Kuhn equilibrium behavioral strategy for the 3-card game.

    The first player's equilibria form a one-parameter family over
    alpha in [0, 1/3]: bid the jack with probability alpha (bluff), the king
    with probability 3*alpha, and call a bid after checking the queen with
    probability alpha + 1/3.  The second player's equilibrium is unique:
    bluff-bid the jack a third of the time after a check, always bid the
    king, call a bid with the queen a third of the time and with the king
    always.
    """
    if not (0.0 <= alpha <= 1.0 / 3.0 + 1e-12):
        raise ValueError("alpha must lie in [0, 1/3]")
    if opponent_role == "x":
        table = {
            "J:": {"check": 1.0 - alpha, "bid": alpha},
            "Q:": {"check": 1.0, "bid": 0.0},
            "K:": {"check": 1.0 - 3.0 * alpha, "bid": 3.0 * alpha},
            "J:kb": {"call": 0.0, "fold": 1.0},
            "Q:kb": {"call": alpha + 1.0 / 3.0, "fold": 2.0 / 3.0 - alpha},
            "K:kb": {"call": 1.0, "fold": 0.0},
        }
    elif opponent_role == "o":
        # unique equilibrium; alpha only parameterizes the first player
        table = {
            "J:k": {"check": 2.0 / 3.0, "bid": 1.0 / 3.0},
            "Q:k": {"check": 1.0, "bid": 0.0},
            "K:k": {"check": 0.0, "bid": 1.0},
            "J:b": {"call": 0.0, "fold": 1.0},
            "Q:b": {"call": 1.0 / 3.0, "fold": 2.0 / 3.0},
            "K:b": {"call": 1.0, "fold": 0.0},
        }
    else:
        raise ValueError(f"unknown role {opponent_role!r}")
    from .engine import OpponentStrategy

    return OpponentStrategy(table)
