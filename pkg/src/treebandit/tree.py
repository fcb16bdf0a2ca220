"""Tree-structured episodic decision problems: data model, evaluation, sampling.

A tree problem is a finite-horizon MDP whose transition graph is a tree of
decision states with terminal leaves.  Each terminal has a unique path from a
level-1 state, a cached normalized return ``rho`` in [0, 1], and a true reach
probability ``q`` (product of transition probabilities along the path).  The
generalization over a single start state is an initial distribution over
level-1 states ("roots"); a singleton root with weight 1 recovers the plain
single-start model.

Learning code must never read transition probabilities or root weights; it
receives a `StructureView` (shape, levels, terminal returns) plus episode
sampling through `TmdpEnv`.
"""

from __future__ import annotations

from dataclasses import dataclass

PROB_ATOL = 1e-9
RENORM_ATOL = 1e-12  # below this, sums count as exact; no renormalization


class TreeError(ValueError):
    """Raised when a tree definition is structurally unusable."""


@dataclass(frozen=True)
class Edge:
    """One child entry under a (state, action) pair."""

    child: int
    is_terminal: bool
    prob: float
    reward: float


@dataclass
class StateNode:
    id: int
    level: int
    children: tuple[tuple[Edge, ...], ...]  # per action index
    label: str = ""

    @property
    def num_actions(self) -> int:
        return len(self.children)


@dataclass
class TerminalNode:
    id: int
    rho: float
    label: str = ""


@dataclass(frozen=True)
class Meta:
    num_states: int
    num_terminals: int
    max_actions: int
    max_branching: int
    horizon: int


@dataclass(frozen=True)
class Policy:
    """Total assignment of one action index per decision state.

    Plain tuple equality; policies that differ only off their consistent
    paths induce the same consistent-terminal set and are interchangeable
    for every estimator and planner quantity.  Use `x_signature` to compare
    by that equivalence.
    """

    actions: tuple[int, ...]

    def action(self, state_id: int) -> int:
        return self.actions[state_id]


@dataclass(frozen=True)
class Profiles:
    """Per-terminal path quantities: return, true reach probability, path."""

    rho: tuple[float, ...]
    q: tuple[float, ...]
    path: tuple[tuple[tuple[int, int], ...], ...]  # (state, action) pairs, root first
    root_of: tuple[int, ...]  # level-1 ancestor of each terminal
    root_weight_of: tuple[float, ...]


@dataclass(frozen=True)
class StructureView:
    """Probability-free view of the tree, safe to hand to learning code."""

    num_states: int
    num_terminals: int
    levels: tuple[int, ...]
    # children[sid][action] -> tuple of (child_id, is_terminal)
    children: tuple[tuple[tuple[tuple[int, bool], ...], ...], ...]
    rho: tuple[float, ...]
    root_ids: tuple[int, ...]
    order_bottom_up: tuple[int, ...]
    terminal_path: tuple[tuple[tuple[int, int], ...], ...]

    def consistent_terminals(self, policy: Policy) -> tuple[int, ...]:
        """Terminal ids whose full path takes the policy's action everywhere."""
        out = []
        stack = list(self.root_ids)
        children = self.children
        actions = policy.actions
        while stack:
            sid = stack.pop()
            for cid, is_term in children[sid][actions[sid]]:
                if is_term:
                    out.append(cid)
                else:
                    stack.append(cid)
        out.sort()
        return tuple(out)

    def canonical_policy_for_terminal(self, terminal_id: int) -> Policy:
        """Member of the terminal's consistent set: path actions on-path,
        lowest action index everywhere else."""
        actions = [0] * self.num_states
        for sid, a in self.terminal_path[terminal_id]:
            actions[sid] = a
        return Policy(tuple(actions))


def x_signature(view_or_mdp, policy: Policy) -> tuple[int, ...]:
    """Canonical identity of a policy's consistent-terminal set."""
    view = view_or_mdp.structure() if isinstance(view_or_mdp, TreeMdp) else view_or_mdp
    return view.consistent_terminals(policy)


class TreeMdp:
    """Immutable tree decision problem; build through `TreeBuilder`.

    Invariants (checked by `validate`): unique parent per non-root node,
    child probabilities summing to 1 per (state, action), levels increasing
    by one along state edges, terminal returns in [0, 1], root weights
    summing to 1.
    """

    def __init__(
        self,
        states: list[StateNode],
        terminals: list[TerminalNode],
        roots: tuple[tuple[int, float], ...],
        gamma: float,
        horizon: int | None = None,
    ):
        self.states = states
        self.terminals = terminals
        self.roots = roots
        self.gamma = gamma
        self.horizon = horizon if horizon is not None else max(
            (s.level for s in states), default=1
        )
        self._profiles: Profiles | None = None
        self._structure: StructureView | None = None

    # -- derived views -------------------------------------------------

    @property
    def num_states(self) -> int:
        return len(self.states)

    @property
    def num_terminals(self) -> int:
        return len(self.terminals)

    @property
    def root_ids(self) -> tuple[int, ...]:
        return tuple(sid for sid, _ in self.roots)

    @property
    def meta(self) -> Meta:
        max_actions = max((s.num_actions for s in self.states), default=0)
        max_branch = max(
            (len(edges) for s in self.states for edges in s.children), default=0
        )
        return Meta(
            num_states=self.num_states,
            num_terminals=self.num_terminals,
            max_actions=max_actions,
            max_branching=max_branch,
            horizon=self.horizon,
        )

    def structure(self) -> StructureView:
        if self._structure is None:
            profiles = self.profiles()
            order = sorted(range(self.num_states), key=lambda i: -self.states[i].level)
            self._structure = StructureView(
                num_states=self.num_states,
                num_terminals=self.num_terminals,
                levels=tuple(s.level for s in self.states),
                children=tuple(
                    tuple(
                        tuple((e.child, e.is_terminal) for e in edges)
                        for edges in s.children
                    )
                    for s in self.states
                ),
                rho=profiles.rho,
                root_ids=self.root_ids,
                order_bottom_up=tuple(order),
                terminal_path=profiles.path,
            )
        return self._structure

    def profiles(self) -> Profiles:
        if self._profiles is None:
            self._profiles = compute_terminal_profiles(self)
        return self._profiles


def compute_terminal_profiles(mdp: TreeMdp) -> Profiles:
    """Single depth-first pass computing every terminal's return, reach
    probability, and root path."""
    n_term = mdp.num_terminals
    rho = [0.0] * n_term
    q = [0.0] * n_term
    path: list[tuple[tuple[int, int], ...]] = [()] * n_term
    root_of = [0] * n_term
    root_w = [0.0] * n_term
    gamma = mdp.gamma

    for rid, w in mdp.roots:
        # stack entries: (state, q so far, return so far, discount, path)
        stack = [(rid, w, 0.0, 1.0, ())]
        while stack:
            sid, qs, ret, disc, p = stack.pop()
            node = mdp.states[sid]
            for a, edges in enumerate(node.children):
                p2 = p + ((sid, a),)
                for e in edges:
                    r2 = ret + disc * e.reward
                    q2 = qs * e.prob
                    if e.is_terminal:
                        rho[e.child] = r2
                        q[e.child] = q2
                        path[e.child] = p2
                        root_of[e.child] = rid
                        root_w[e.child] = w
                    else:
                        stack.append((e.child, q2, r2, disc * gamma, p2))
    return Profiles(tuple(rho), tuple(q), tuple(path), tuple(root_of), tuple(root_w))


def validate(mdp: TreeMdp) -> list[str]:
    """Report every violated structural invariant; empty means well-formed."""
    issues: list[str] = []
    n_states, n_terms = mdp.num_states, mdp.num_terminals

    root_ids = mdp.root_ids
    if not root_ids:
        issues.append("no root state")
    wsum = sum(w for _, w in mdp.roots)
    if abs(wsum - 1.0) > PROB_ATOL:
        issues.append(f"root weights sum to {wsum!r}, expected 1")
    for rid, w in mdp.roots:
        if not (0 <= rid < n_states):
            issues.append(f"root id {rid} out of range")
        elif mdp.states[rid].level != 1:
            issues.append(f"root state {rid} has level {mdp.states[rid].level}, expected 1")
        if w < 0:
            issues.append(f"root weight {w!r} negative")

    state_parent: dict[int, tuple[int, int]] = {}
    term_parent: dict[int, tuple[int, int]] = {}
    for s in mdp.states:
        for a, edges in enumerate(s.children):
            psum = sum(e.prob for e in edges)
            if not edges:
                issues.append(f"state {s.id} action {a} has no children")
                continue
            if abs(psum - 1.0) > PROB_ATOL:
                issues.append(
                    f"probability normalization violated at state {s.id} action {a}: sum={psum!r}"
                )
            for e in edges:
                if e.prob < 0 or e.prob > 1 + PROB_ATOL:
                    issues.append(f"probability out of range on edge {s.id}-{a}->{e.child}")
                if e.is_terminal:
                    if not (0 <= e.child < n_terms):
                        issues.append(f"unknown terminal {e.child}")
                    elif e.child in term_parent:
                        issues.append(
                            f"tree property violated: terminal {e.child} has two parents"
                        )
                    else:
                        term_parent[e.child] = (s.id, a)
                else:
                    if not (0 <= e.child < n_states):
                        issues.append(f"unknown state {e.child}")
                        continue
                    if e.child in state_parent or e.child in root_ids:
                        issues.append(
                            f"tree property violated: state {e.child} has two parents"
                        )
                    else:
                        state_parent[e.child] = (s.id, a)
                    if mdp.states[e.child].level != s.level + 1:
                        issues.append(
                            f"level violated: state {e.child} at level "
                            f"{mdp.states[e.child].level} under level {s.level}"
                        )

    for s in mdp.states:
        if s.id not in state_parent and s.id not in root_ids:
            issues.append(f"state {s.id} unreachable (no parent, not a root)")
        if s.level < 1 or s.level > mdp.horizon:
            issues.append(f"state {s.id} level {s.level} outside [1, {mdp.horizon}]")
    for tid in range(n_terms):
        if tid not in term_parent:
            issues.append(f"terminal {tid} unreachable")

    if not issues:
        profiles = mdp.profiles()
        for tid in range(n_terms):
            r = profiles.rho[tid]
            if r < -PROB_ATOL or r > 1 + PROB_ATOL:
                issues.append(f"terminal {tid} return {r!r} outside [0, 1]")
            declared = mdp.terminals[tid].rho
            if abs(declared - r) > 1e-9:
                issues.append(
                    f"terminal {tid} cached return {declared!r} != path sum {r!r}"
                )
    return issues


class TreeBuilder:
    """Incremental construction with normalization and validation at build."""

    def __init__(self, gamma: float = 1.0):
        self.gamma = gamma
        self._states: list[dict] = []
        self._terminals: list[str] = []
        self._edges: list[tuple[int, int, int, bool, float, float]] = []
        self._roots: list[tuple[int, float]] = []

    def state(self, label: str = "") -> int:
        self._states.append({"label": label})
        return len(self._states) - 1

    def terminal(self, label: str = "") -> int:
        self._terminals.append(label)
        return len(self._terminals) - 1

    def edge(self, state: int, action: int, child: int, *, terminal: bool,
             p: float, r: float = 0.0) -> None:
        self._edges.append((state, action, child, terminal, p, r))

    def root(self, state: int, w: float = 1.0) -> None:
        self._roots.append((state, w))

    def build(self) -> TreeMdp:
        n = len(self._states)
        per_action: list[dict[int, list[Edge]]] = [dict() for _ in range(n)]
        for sid, a, child, is_term, p, r in self._edges:
            per_action[sid].setdefault(a, []).append(Edge(child, is_term, p, r))

        # normalize probabilities; reject if off by more than tolerance
        for sid, amap in enumerate(per_action):
            for a, edges in amap.items():
                psum = sum(e.prob for e in edges)
                if abs(psum - 1.0) > PROB_ATOL:
                    raise TreeError(
                        f"probability normalization violated at state {sid} "
                        f"action {a}: sum={psum!r}"
                    )
                if abs(psum - 1.0) > RENORM_ATOL:
                    amap[a] = [
                        Edge(e.child, e.is_terminal, e.prob / psum, e.reward)
                        for e in edges
                    ]

        # infer levels breadth-first from the roots
        levels = [0] * n
        frontier = [rid for rid, _ in self._roots]
        for rid in frontier:
            levels[rid] = 1
        while frontier:
            nxt = []
            for sid in frontier:
                for edges in per_action[sid].values():
                    for e in edges:
                        if not e.is_terminal and levels[e.child] == 0:
                            levels[e.child] = levels[sid] + 1
                            nxt.append(e.child)
            frontier = nxt

        states = []
        for sid in range(n):
            amap = per_action[sid]
            if amap and sorted(amap) != list(range(len(amap))):
                raise TreeError(f"state {sid} has non-contiguous action indices")
            states.append(
                StateNode(
                    id=sid,
                    level=levels[sid],
                    children=tuple(tuple(amap[a]) for a in range(len(amap))),
                    label=self._states[sid]["label"],
                )
            )

        wsum = sum(w for _, w in self._roots)
        if not self._roots or abs(wsum - 1.0) > PROB_ATOL:
            raise TreeError(f"root weights sum to {wsum!r}, expected 1")
        renorm = abs(wsum - 1.0) > RENORM_ATOL
        roots = tuple(
            (rid, (w / wsum if renorm else w)) for rid, w in self._roots
        )

        terminals = [TerminalNode(i, 0.0, lab) for i, lab in enumerate(self._terminals)]
        mdp = TreeMdp(states, terminals, roots, self.gamma)
        profiles = mdp.profiles()
        for t in terminals:
            t.rho = profiles.rho[t.id]
        issues = validate(mdp)
        if issues:
            raise TreeError("; ".join(issues))
        return mdp


# -- evaluation ---------------------------------------------------------


def evaluate_bellman(mdp: TreeMdp, policy: Policy) -> float:
    """Policy value at the start by bottom-up expected-return recursion."""
    order = mdp.structure().order_bottom_up
    gamma = mdp.gamma
    values = [0.0] * mdp.num_states
    for sid in order:
        edges = mdp.states[sid].children[policy.actions[sid]]
        v = 0.0
        for e in edges:
            cont = 0.0 if e.is_terminal else values[e.child]
            v += e.prob * (e.reward + gamma * cont)
        values[sid] = v
    return sum(w * values[rid] for rid, w in mdp.roots)


def evaluate_terminal_sum(mdp: TreeMdp, policy: Policy) -> float:
    """Policy value as the reach-probability-weighted sum of terminal returns."""
    profiles = mdp.profiles()
    sig = mdp.structure().consistent_terminals(policy)
    return sum(profiles.q[t] * profiles.rho[t] for t in sig)


def consistent_terminals(mdp: TreeMdp, policy: Policy) -> tuple[int, ...]:
    return mdp.structure().consistent_terminals(policy)


def canonical_policy_for_terminal(mdp: TreeMdp, terminal_id: int) -> Policy:
    return mdp.structure().canonical_policy_for_terminal(terminal_id)


# -- sampling -----------------------------------------------------------


@dataclass(frozen=True)
class Trajectory:
    steps: tuple[tuple[int, int, int, bool], ...]  # (state, action, child, child_is_terminal)
    terminal: int
    ret: float


def _pick(edges, u: float) -> Edge:
    acc = 0.0
    last = edges[0]
    for e in edges:
        acc += e.prob
        if u < acc:
            return e
        last = e
    return last


def sample_episode(mdp: TreeMdp, policy: Policy, rng) -> Trajectory:
    """Walk from a sampled level-1 state following the policy.

    Deterministic given the generator's stream; draws one uniform for the
    root (even when there is a single root, keeping streams stable across
    tree variants) and one per decision state.
    """
    u = rng.random()
    acc = 0.0
    sid = mdp.roots[-1][0]
    for rid, w in mdp.roots:
        acc += w
        if u < acc:
            sid = rid
            break
    steps = []
    ret = 0.0
    disc = 1.0
    gamma = mdp.gamma
    while True:
        a = policy.actions[sid]
        e = _pick(mdp.states[sid].children[a], rng.random())
        steps.append((sid, a, e.child, e.is_terminal))
        ret += disc * e.reward
        disc *= gamma
        if e.is_terminal:
            return Trajectory(tuple(steps), e.child, ret)
        sid = e.child


class TmdpEnv:
    """Episode-sampling capability handed to learners.

    Learners get the structure view plus `play`; the true transition
    probabilities stay private to the environment.
    """

    def __init__(self, mdp: TreeMdp, rng):
        self._mdp = mdp
        self._rng = rng
        self.structure = mdp.structure()

    def play(self, policy: Policy) -> int:
        """One episode; returns the terminal reached.  Same draw sequence as
        `sample_episode`."""
        rng = self._rng
        mdp = self._mdp
        u = rng.random()
        acc = 0.0
        sid = mdp.roots[-1][0]
        for rid, w in mdp.roots:
            acc += w
            if u < acc:
                sid = rid
                break
        actions = policy.actions
        states = mdp.states
        while True:
            e = _pick(states[sid].children[actions[sid]], rng.random())
            if e.is_terminal:
                return e.child
            sid = e.child

    def episode(self, policy: Policy) -> Trajectory:
        return sample_episode(self._mdp, policy, self._rng)
