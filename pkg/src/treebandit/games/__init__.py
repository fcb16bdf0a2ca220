"""Game registry and compilation entry points."""

from __future__ import annotations

from dataclasses import dataclass

from .engine import (
    CompileError,
    OpponentStrategy,
    StrategyFormatError,
    compile_game,
    dumps_strategy,
    load_strategy,
    loads_strategy,
    other_role,
    save_strategy,
    uniform_strategy,
)
from .kuhn import KUHN3, KUHN5, nash_strategy
from .leduc import LEDUC

GAMES = {"kuhn3": KUHN3, "kuhn5": KUHN5, "leduc": LEDUC}


@dataclass(frozen=True)
class GameSpec:
    """A game plus the agent's seat."""

    game_id: str
    role: str = "x"

    def __post_init__(self):
        if self.game_id not in GAMES:
            raise ValueError(f"unknown game {self.game_id!r}")
        if self.role not in ("x", "o"):
            raise ValueError(f"unknown role {self.role!r}")

    @property
    def game(self):
        return GAMES[self.game_id]

    @property
    def num_actions(self) -> int:
        return len(self.game.action_names)

    @property
    def action_names(self) -> tuple[str, ...]:
        return self.game.action_names

    @property
    def u_min(self) -> float:
        return self.game.u_min

    @property
    def u_max(self) -> float:
        return self.game.u_max

    @property
    def opponent_role(self) -> str:
        return other_role(self.role)


def compile(spec: GameSpec, opponent: OpponentStrategy):
    """Agent-side tree for the requested seat against the fixed opponent."""
    return compile_game(spec.game, spec.role, opponent)


def builtin_opponent(spec: GameSpec, kind: str, alpha: float = 1.0 / 3.0) -> OpponentStrategy:
    """Built-in opponent strategies.

    "uniform" plays every legal action with equal probability at every
    reachable infoset of any game; "kuhn_nash" is the analytic 3-card Kuhn
    equilibrium (the first player's one-parameter family when the opponent
    sits as x, the unique second-player equilibrium when it sits as o).
    """
    if kind == "uniform":
        return uniform_strategy(spec.game, spec.opponent_role)
    if kind == "kuhn_nash":
        if spec.game_id != "kuhn3":
            raise ValueError("kuhn_nash is only defined for kuhn3")
        return nash_strategy(spec.opponent_role, alpha)
    raise ValueError(f"unknown builtin opponent {kind!r}")


__all__ = [
    "CompileError",
    "GameSpec",
    "GAMES",
    "OpponentStrategy",
    "StrategyFormatError",
    "builtin_opponent",
    "compile",
    "compile_game",
    "dumps_strategy",
    "load_strategy",
    "loads_strategy",
    "other_role",
    "save_strategy",
    "uniform_strategy",
]
