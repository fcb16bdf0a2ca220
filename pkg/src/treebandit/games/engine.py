"""Compilation of two-player zero-sum imperfect-information games, against a
fixed opponent strategy, into exact tree decision problems over the agent's
action-observation histories.

A raw game exposes histories with `kind` in {"chance", "x", "o", "terminal"},
chance outcome distributions, legal actions in a canonical order, infoset
keys for the player to move, terminal observation keys per role, and
utilities from x's perspective.

The compiler propagates belief bundles: sets of weighted true histories
consistent with one agent observation history.  Chance events and opponent
moves between two agent decision points fold into a single conditional
transition distribution; terminal returns are expected raw utilities
conditioned on the terminal observation, affinely normalized to [0, 1] by
the static utility range.  Zero-probability arrivals are pruned.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass

from ..tree import TreeBuilder, TreeMdp

PROB_ATOL = 1e-9


class CompileError(ValueError):
    """The opponent strategy does not cover the requested game."""


class StrategyFormatError(ValueError):
    """A strategy file is malformed."""


@dataclass(frozen=True)
class OpponentStrategy:
    """Behavioral strategy: infoset key -> {action name: probability}."""

    table: dict[str, dict[str, float]]

    def __post_init__(self):
        for key, dist in self.table.items():
            total = sum(dist.values())
            if abs(total - 1.0) > PROB_ATOL:
                raise StrategyFormatError(
                    f"distribution at infoset {key!r} sums to {total!r}"
                )
            for a, p in dist.items():
                if p < 0:
                    raise StrategyFormatError(
                        f"negative probability for {a!r} at {key!r}"
                    )

    def prob(self, key: str, action: str) -> float:
        return self.table[key].get(action, 0.0)


def other_role(role: str) -> str:
    if role not in ("x", "o"):
        raise ValueError(f"unknown role {role!r}")
    return "o" if role == "x" else "x"


def compile_game(game, role: str, opponent: OpponentStrategy) -> TreeMdp:
    """Build the agent-side tree for `role` against the fixed opponent."""
    opp_role = other_role(role)
    span = game.u_max - game.u_min

    def advance(h, w, decisions, terminals):
        """Push mass through chance/opponent nodes to the next agent decision
        or terminal observation."""
        kind = game.kind(h)
        if kind == "terminal":
            terminals.setdefault(game.terminal_key(h, role), []).append((h, w))
            return
        if kind == "chance":
            for p, h2 in game.chance_outcomes(h):
                if p > 0.0:
                    advance(h2, w * p, decisions, terminals)
            return
        if kind == opp_role:
            key = game.infoset_key(h)
            dist = opponent.table.get(key)
            if dist is None:
                raise CompileError(f"opponent strategy missing infoset {key!r}")
            legal = game.legal_actions(h)
            unknown = set(dist) - set(legal)
            if unknown:
                raise CompileError(
                    f"opponent strategy at {key!r} names illegal actions {sorted(unknown)}"
                )
            for a in legal:
                pa = dist.get(a, 0.0)
                if pa > 0.0:
                    advance(game.apply(h, a), w * pa, decisions, terminals)
            return
        decisions.setdefault(game.infoset_key(h), []).append((h, w))

    builder = TreeBuilder(gamma=1.0)
    state_ids: dict[str, int] = {}
    term_entries: dict[str, float] = {}  # key -> expected raw utility
    edge_specs: list[tuple[int, int, str, bool, float]] = []

    first_dec: dict[str, list] = {}
    first_term: dict[str, list] = {}
    advance(game.root_history(), 1.0, first_dec, first_term)
    if first_term:
        raise CompileError("game can reach a terminal before the agent ever acts")

    queue: deque[tuple[str, list]] = deque()
    total_mass = sum(w for b in first_dec.values() for _, w in b)
    roots = []
    for key in sorted(first_dec):
        bundle = first_dec[key]
        sid = builder.state(label=key)
        state_ids[key] = sid
        roots.append((sid, sum(w for _, w in bundle) / total_mass))
        queue.append((key, bundle))

    while queue:
        key, bundle = queue.popleft()
        sid = state_ids[key]
        mass = sum(w for _, w in bundle)
        legal = game.legal_actions(bundle[0][0])
        for ai, action in enumerate(legal):
            decisions: dict[str, list] = {}
            terminals: dict[str, list] = {}
            for h, w in bundle:
                advance(game.apply(h, action), w, decisions, terminals)
            for tkey in sorted(terminals):
                arrivals = terminals[tkey]
                tw = sum(w for _, w in arrivals)
                if tw <= 0.0:
                    continue
                eu = sum(w * game.utility_x(h) for h, w in arrivals) / tw
                if role == "o":
                    eu = -eu
                term_entries[tkey] = eu
                edge_specs.append((sid, ai, tkey, True, tw / mass))
            for dkey in sorted(decisions):
                arrivals = decisions[dkey]
                dw = sum(w for _, w in arrivals)
                if dw <= 0.0:
                    continue
                cid = builder.state(label=dkey)
                state_ids[dkey] = cid
                edge_specs.append((sid, ai, dkey, False, dw / mass))
                queue.append((dkey, arrivals))

    term_ids = {key: builder.terminal(label=key) for key in sorted(term_entries)}
    for sid, ai, ckey, is_term, p in edge_specs:
        if is_term:
            r = (term_entries[ckey] - game.u_min) / span
            builder.edge(sid, ai, term_ids[ckey], terminal=True, p=p, r=r)
        else:
            builder.edge(sid, ai, state_ids[ckey], terminal=False, p=p, r=0.0)
    for sid, w in roots:
        builder.root(sid, w)
    return builder.build()


def reachable_opponent_infosets(game, opp_role: str) -> dict[str, tuple[str, ...]]:
    """Opponent infosets reachable under free play, with their legal actions."""
    out: dict[str, tuple[str, ...]] = {}
    stack = [game.root_history()]
    while stack:
        h = stack.pop()
        kind = game.kind(h)
        if kind == "terminal":
            continue
        if kind == "chance":
            stack.extend(h2 for _, h2 in game.chance_outcomes(h))
            continue
        if kind == opp_role:
            out.setdefault(game.infoset_key(h), game.legal_actions(h))
        stack.extend(game.apply(h, a) for a in game.legal_actions(h))
    return out


def uniform_strategy(game, opp_role: str) -> OpponentStrategy:
    table = {}
    for key, legal in sorted(reachable_opponent_infosets(game, opp_role).items()):
        table[key] = {a: 1.0 / len(legal) for a in legal}
    return OpponentStrategy(table)


# -- strategy files --------------------------------------------------------


def dumps_strategy(strategy: OpponentStrategy) -> str:
    lines = []
    for key in sorted(strategy.table):
        for action, p in strategy.table[key].items():
            lines.append(f"{key} {action} {p!r}")
    return "\n".join(lines) + "\n"


def save_strategy(strategy: OpponentStrategy, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps_strategy(strategy))


def loads_strategy(text: str) -> OpponentStrategy:
    table: dict[str, dict[str, float]] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 3:
            raise StrategyFormatError(
                f"line {lineno}: expected '<infoset> <action> <prob>', got {line!r}"
            )
        key, action, prob_s = parts
        try:
            p = float(prob_s)
        except ValueError as exc:
            raise StrategyFormatError(
                f"line {lineno}: bad probability {prob_s!r}"
            ) from exc
        table.setdefault(key, {})[action] = p
    for key, dist in table.items():
        total = sum(dist.values())
        if abs(total - 1.0) > PROB_ATOL:
            raise StrategyFormatError(
                f"distribution at infoset {key!r} sums to {total!r}"
            )
    return OpponentStrategy(table)


def load_strategy(path) -> OpponentStrategy:
    with open(path, "r", encoding="utf-8") as fh:
        return loads_strategy(fh.read())
