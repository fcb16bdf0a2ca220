"""Learner-side sufficient statistics and confidence bounds.

The estimator is terminal-based: for each terminal the learner keeps how
many episodes played a consistent policy (``n``) and how many of those
actually reached it (``n_plus``).  A policy's value estimate plugs the
per-terminal ratios into the terminal-sum decomposition; its confidence
width is driven by the least-counted consistent terminal.

All mistake-probability arithmetic stays in the log domain: the policy
count ``|A|^|S|`` overflows floats long before the games of interest, so
only ``|S| * ln|A|`` is ever materialized.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .tree import Policy, TreeMdp

INF = float("inf")


class EstimateUndefinedError(RuntimeError):
    """An estimate was requested for a terminal with no data."""


@dataclass
class OutcomeLog:
    """Per-terminal 0/1 outcome sequences with O(1) prefix sums.

    Only allocated for the uniform variant, which re-reads old outcomes;
    the default learners keep integer counters only.
    """

    prefix: list[list[int]]  # prefix[t][k] = sum of first k outcomes

    @classmethod
    def empty(cls, num_terminals: int) -> "OutcomeLog":
        return cls([[0] for _ in range(num_terminals)])

    def append(self, terminal: int, outcome: int) -> None:
        p = self.prefix[terminal]
        p.append(p[-1] + outcome)

    def length(self, terminal: int) -> int:
        return len(self.prefix[terminal]) - 1

    def head_sum(self, terminal: int, m: int) -> int:
        return self.prefix[terminal][m]


@dataclass
class CountsTable:
    """Counts per terminal plus the episode clock.

    ``t`` is the index of the upcoming episode (episodes played + 1), so
    ``n(sigma) <= t - 1`` always holds.
    """

    n: list[int]
    n_plus: list[int]
    episodes: int = 0
    log: OutcomeLog | None = None

    @classmethod
    def empty(cls, num_terminals: int, *, with_log: bool = False) -> "CountsTable":
        return cls(
            n=[0] * num_terminals,
            n_plus=[0] * num_terminals,
            log=OutcomeLog.empty(num_terminals) if with_log else None,
        )

    @property
    def t(self) -> int:
        return self.episodes + 1

    def snapshot(self) -> "CountsTable":
        return CountsTable(list(self.n), list(self.n_plus), self.episodes, None)


def record_episode(counts: CountsTable, consistent, reached: int) -> None:
    """Apply one episode's updates: every consistent terminal was played,
    the reached one succeeded."""
    if reached not in consistent:
        raise ValueError(
            f"reached terminal {reached} not in the played policy's consistent set"
        )
    n = counts.n
    for t in consistent:
        n[t] += 1
    counts.n_plus[reached] += 1
    counts.episodes += 1
    if counts.log is not None:
        log = counts.log
        for t in consistent:
            log.append(t, 1 if t == reached else 0)


def counts_snapshot_csv(counts: CountsTable) -> str:
    lines = ["terminal_id,n,n_plus"]
    for tid, (a, b) in enumerate(zip(counts.n, counts.n_plus)):
        lines.append(f"{tid},{a},{b}")
    return "\n".join(lines) + "\n"


# -- configuration -------------------------------------------------------


@dataclass(frozen=True)
class BoundConfig:
    """Confidence-bound configuration.

    mode "theory" uses the Bernstein-derived width sqrt(8/(3m) * L) where L
    is the schedule's log term; mode "practical" uses the simplified width
    sqrt(C/m * ln(t/delta)).  Schedules:

      lucb          L = ln(3/delta) + log_num_policies + (num_terminals+4) ln t
      ucb           L =               log_num_policies + (num_terminals+4) ln t
      lucb_uniform  L = ln(3/delta) + log_num_policies + 5 ln t
      flat          L = ln(3/delta) + ln(num_arms)     + 4 ln t
      fixed         L = ln(1/delta)
    """

    mode: str = "theory"
    c: float = 1.0
    delta: float = 0.05
    epsilon: float = 0.1
    schedule: str = "lucb"
    log_num_policies: float = 0.0
    num_terminals: int = 0
    num_arms: int = 0

    def __post_init__(self):
        if self.mode not in ("theory", "practical"):
            raise ValueError(f"unknown bound mode {self.mode!r}")
        if self.schedule not in ("lucb", "ucb", "lucb_uniform", "flat", "fixed"):
            raise ValueError(f"unknown schedule {self.schedule!r}")
        if not (0.0 < self.delta < 1.0):
            raise ValueError("delta must lie in (0, 1)")
        if self.c <= 0.0:
            raise ValueError("C must be positive")

    @classmethod
    def for_tree(cls, mdp: TreeMdp, *, num_actions: int | None = None, **kw) -> "BoundConfig":
        """Problem constants from a tree; `num_actions` overrides the
        action-alphabet size when the game defines more actions than any
        single state exposes."""
        meta = mdp.meta
        k = num_actions if num_actions is not None else max(meta.max_actions, 1)
        return cls(
            log_num_policies=meta.num_states * math.log(max(k, 1)),
            num_terminals=meta.num_terminals,
            **kw,
        )


def delta_schedule(t: int, config: BoundConfig) -> float:
    """Log term entering the width at episode/batch index t.

    Theory mode returns ln(1/delta_eff) for the schedule's effective mistake
    probability; practical mode returns ln(t/delta).
    """
    if t < 1:
        raise ValueError("t must be >= 1")
    if config.mode == "practical":
        return math.log(t) + math.log(1.0 / config.delta)
    s = config.schedule
    if s == "lucb":
        return (
            math.log(3.0 / config.delta)
            + config.log_num_policies
            + (config.num_terminals + 4) * math.log(t)
        )
    if s == "ucb":
        return config.log_num_policies + (config.num_terminals + 4) * math.log(t)
    if s == "lucb_uniform":
        return math.log(3.0 / config.delta) + config.log_num_policies + 5 * math.log(t)
    if s == "flat":
        return (
            math.log(3.0 / config.delta)
            + math.log(max(config.num_arms, 1))
            + 4 * math.log(t)
        )
    return math.log(1.0 / config.delta)  # fixed


def beta(m: int, log_term: float, config: BoundConfig) -> float:
    """Confidence width at count m; infinite sentinel at m = 0 so that
    unexplored branches dominate any UCB maximization."""
    if m <= 0:
        return INF
    if config.mode == "practical":
        return math.sqrt(config.c * log_term / m)
    return math.sqrt(8.0 * log_term / (3.0 * m))


def width_constant(t: int, config: BoundConfig) -> float:
    """Per-batch constant k such that width(m) = sqrt(k / m)."""
    log_term = delta_schedule(t, config)
    if config.mode == "practical":
        return config.c * log_term
    return 8.0 * log_term / 3.0


# -- estimates ------------------------------------------------------------


def q_hat(counts: CountsTable, sigma: int) -> float:
    if counts.n[sigma] < 1:
        raise EstimateUndefinedError(f"terminal {sigma} has no plays")
    return counts.n_plus[sigma] / counts.n[sigma]


def play_count(counts: CountsTable, sig) -> int:
    """Usable sample size for a policy: min count over its consistent set."""
    return min((counts.n[t] for t in sig), default=0)


def v_hat(counts: CountsTable, mdp: TreeMdp, policy: Policy) -> float:
    """Plug-in value estimate; may exceed 1, no clipping here."""
    view = mdp.structure()
    sig = view.consistent_terminals(policy)
    total = 0.0
    for t in sig:
        if counts.n[t] < 1:
            raise EstimateUndefinedError(f"terminal {t} has no plays")
        total += counts.n_plus[t] / counts.n[t] * view.rho[t]
    return total


def v_hat_uniform(counts: CountsTable, mdp: TreeMdp, policy: Policy) -> float:
    """Value estimate using only the first m outcomes per terminal, where m
    is the policy's play count.  Requires the outcome log."""
    if counts.log is None:
        raise EstimateUndefinedError("outcome log not enabled")
    view = mdp.structure()
    sig = view.consistent_terminals(policy)
    m = play_count(counts, sig)
    if m < 1:
        raise EstimateUndefinedError("policy has an unplayed consistent terminal")
    log = counts.log
    return sum(log.head_sum(t, m) / m * view.rho[t] for t in sig)


def clipped_bounds(value: float, width: float) -> tuple[float, float]:
    """(lcb, ucb) around a value estimate: the lower bound clips the
    estimate at 1 before subtracting the width; the upper bound does not."""
    return min(value, 1.0) - width, value + width


def ucb(counts: CountsTable, mdp: TreeMdp, policy: Policy, t: int,
        config: BoundConfig) -> float:
    sig = mdp.structure().consistent_terminals(policy)
    m = play_count(counts, sig)
    if m == 0:
        return INF
    return v_hat(counts, mdp, policy) + beta(m, delta_schedule(t, config), config)


def lcb(counts: CountsTable, mdp: TreeMdp, policy: Policy, t: int,
        config: BoundConfig) -> float:
    sig = mdp.structure().consistent_terminals(policy)
    m = play_count(counts, sig)
    if m == 0:
        return -INF
    w = beta(m, delta_schedule(t, config), config)
    return min(v_hat(counts, mdp, policy), 1.0) - w
