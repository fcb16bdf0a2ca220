"""Shared test utilities: random instances and independent oracles."""

from __future__ import annotations

import random

from treebandit.estimator import CountsTable
from treebandit.tree import Policy, TreeBuilder, TreeMdp


def random_tree(
    rng: random.Random,
    *,
    max_depth: int = 4,
    max_actions: int = 3,
    max_branching: int = 3,
    gamma_choices: tuple[float, ...] = (0.5, 1.0),
    multi_root: bool = False,
) -> TreeMdp:
    """Random valid tree with per-edge rewards scaled so every terminal
    return lands in [0, 1]."""
    b = TreeBuilder(gamma=rng.choice(list(gamma_choices)))
    depth_cap = rng.randint(1, max_depth)
    reward_cap = 1.0 / depth_cap

    def grow(depth: int) -> int:
        sid = b.state()
        n_actions = rng.randint(1, max_actions)
        for a in range(n_actions):
            n_children = rng.randint(1, max_branching)
            weights = [rng.random() + 0.05 for _ in range(n_children)]
            total = sum(weights)
            for w in weights:
                p = w / total
                r = rng.random() * reward_cap
                if depth >= depth_cap or rng.random() < 0.35:
                    b.edge(sid, a, b.terminal(), terminal=True, p=p, r=r)
                else:
                    b.edge(sid, a, grow(depth + 1), terminal=False, p=p, r=r)
        return sid

    if multi_root and rng.random() < 0.7:
        n_roots = rng.randint(2, 3)
        weights = [rng.random() + 0.1 for _ in range(n_roots)]
        total = sum(weights)
        for w in weights:
            b.root(grow(1), w / total)
    else:
        b.root(grow(1))
    return b.build()


def random_counts(rng: random.Random, mdp: TreeMdp, *, low: int = 1,
                  high: int = 60) -> CountsTable:
    """Arbitrary count table with every terminal played at least `low` times."""
    counts = CountsTable.empty(mdp.num_terminals)
    for t in range(mdp.num_terminals):
        n = rng.randint(low, high)
        counts.n[t] = n
        counts.n_plus[t] = rng.randint(0, n)
    counts.episodes = max(counts.n) if counts.n else 0
    return counts


def random_policy(rng: random.Random, mdp: TreeMdp) -> Policy:
    return Policy(tuple(rng.randrange(s.num_actions) for s in mdp.states))


def chain_tree(rewards: list[float], gamma: float = 1.0) -> TreeMdp:
    """Single path of unit-probability edges ending in one terminal."""
    b = TreeBuilder(gamma=gamma)
    states = [b.state() for _ in rewards]
    for i, r in enumerate(rewards[:-1]):
        b.edge(states[i], 0, states[i + 1], terminal=False, p=1.0, r=r)
    b.edge(states[-1], 0, b.terminal(), terminal=True, p=1.0, r=rewards[-1])
    b.root(states[0])
    return b.build()


def two_class_tree(v_hi: float = 0.8, v_lo: float = 0.5) -> TreeMdp:
    """Root with two actions, each to one terminal: two policy classes."""
    b = TreeBuilder()
    s = b.state()
    b.edge(s, 0, b.terminal(), terminal=True, p=1.0, r=v_hi)
    b.edge(s, 1, b.terminal(), terminal=True, p=1.0, r=v_lo)
    b.root(s)
    return b.build()


# -- independent raw-game oracle -------------------------------------------


def raw_policy_value(game, role: str, opponent, policy_by_key) -> float:
    """Expected raw utility (agent's perspective) of an infoset-keyed pure
    strategy, computed directly on the raw game tree."""
    from treebandit.games.engine import other_role

    opp_role = other_role(role)
    sign = 1.0 if role == "x" else -1.0

    def value(h) -> float:
        kind = game.kind(h)
        if kind == "terminal":
            return sign * game.utility_x(h)
        if kind == "chance":
            return sum(p * value(h2) for p, h2 in game.chance_outcomes(h))
        if kind == opp_role:
            key = game.infoset_key(h)
            dist = opponent.table[key]
            return sum(
                dist.get(a, 0.0) * value(game.apply(h, a))
                for a in game.legal_actions(h)
                if dist.get(a, 0.0) > 0.0
            )
        return value(game.apply(h, policy_by_key[game.infoset_key(h)]))

    return value(game.root_history())


def agent_infosets(game, role: str) -> dict[str, tuple[str, ...]]:
    """All agent infosets reachable under free play, with legal actions."""
    from treebandit.games.engine import other_role

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
        if kind == role:
            out.setdefault(game.infoset_key(h), game.legal_actions(h))
        stack.extend(game.apply(h, a) for a in game.legal_actions(h))
    return out


def expectimax_value(game, role: str, opponent) -> float:
    """Best-response raw value by exhaustive enumeration of the agent's pure
    infoset strategies (independent of the compiler entirely)."""
    import itertools

    infosets = agent_infosets(game, role)
    keys = sorted(infosets)
    best = None
    for combo in itertools.product(*(infosets[k] for k in keys)):
        strategy = dict(zip(keys, combo))
        v = raw_policy_value(game, role, opponent, strategy)
        if best is None or v > best:
            best = v
    return best


def expectimax_policy_value(game, role: str, opponent, mdp: TreeMdp,
                            policy) -> float:
    """Expected raw utility of a compiled-tree policy, replayed directly on
    the raw game (independent of the compiler's probabilities)."""
    index_by_key = {s.label: s.id for s in mdp.states}

    from treebandit.games.engine import other_role

    opp_role = other_role(role)
    sign = 1.0 if role == "x" else -1.0

    def value(h) -> float:
        kind = game.kind(h)
        if kind == "terminal":
            return sign * game.utility_x(h)
        if kind == "chance":
            return sum(p * value(h2) for p, h2 in game.chance_outcomes(h))
        if kind == opp_role:
            key = game.infoset_key(h)
            dist = opponent.table[key]
            return sum(
                dist.get(a, 0.0) * value(game.apply(h, a))
                for a in game.legal_actions(h)
                if dist.get(a, 0.0) > 0.0
            )
        idx = policy.actions[index_by_key[game.infoset_key(h)]]
        return value(game.apply(h, game.legal_actions(h)[idx]))

    return value(game.root_history())
