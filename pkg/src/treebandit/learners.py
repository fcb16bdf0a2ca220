"""Online learning loops.

All learners share the initialization discipline: while some terminal has
never been played, play a canonical policy consistent with the lowest such
terminal id (one episode per iteration; an episode may incidentally cover
other terminals and shorten the phase).  Iteration indices count batches;
episode numbers count plays, initialization included.

Learners see only the structure view and the sampling capability; the true
transition model stays inside the environment.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .estimator import BoundConfig, CountsTable, delta_schedule, record_episode
from .planner import (
    NoSecondPolicyError,
    best_empirical_policy,
    empirical_pass,
    find_max_ucb,
    second_max_ucb,
    second_max_ucb_uniform,
    uniform_best_policy,
)
from .tree import Policy, TmdpEnv

INF = float("inf")


@dataclass(frozen=True)
class LearnerEvent:
    episode: int  # 1-based play index
    batch: int  # loop iteration that produced the play
    policy_sig: tuple[int, ...]
    terminal: int
    phase: str  # "init" or "main"


@dataclass(frozen=True)
class StopEvent:
    episode: int
    batch: int
    policy_sig: tuple[int, ...]
    lcb1: float
    ucb2: float


@dataclass(frozen=True)
class PacResult:
    policy: Policy
    episodes: int
    batches: int
    converged: bool


@dataclass(frozen=True)
class UcbResult:
    episodes: int


class EventSink:
    """No-op sink; override what you need.  Streams are single-consumer."""

    def episode(self, episode, batch, sig, terminal, phase):
        pass

    def batch_status(self, batch, episode, pi1_sig, lcb1, ucb2):
        pass

    def stopped(self, event: StopEvent):
        pass


class ListSink(EventSink):
    """Materializes the full event stream; for tests and small runs."""

    def __init__(self):
        self.events: list[LearnerEvent] = []
        self.stop: StopEvent | None = None

    def episode(self, episode, batch, sig, terminal, phase):
        self.events.append(LearnerEvent(episode, batch, sig, terminal, phase))

    def stopped(self, event: StopEvent):
        if self.stop is not None:
            raise RuntimeError("stop emitted twice")
        self.stop = event


def _with_schedule(config: BoundConfig, schedule: str, num_arms: int | None = None) -> BoundConfig:
    if config.schedule == schedule and (num_arms is None or config.num_arms == num_arms):
        return config
    return BoundConfig(
        mode=config.mode, c=config.c, delta=config.delta,
        epsilon=config.epsilon, schedule=schedule,
        log_num_policies=config.log_num_policies,
        num_terminals=config.num_terminals,
        num_arms=config.num_arms if num_arms is None else num_arms,
    )


def _init_step(env: TmdpEnv, counts: CountsTable, cursor: int):
    """Lowest uncovered terminal id, or -1 when initialization is complete.
    The cursor only moves forward because counts never decrease."""
    n = counts.n
    num = env.structure.num_terminals
    while cursor < num and n[cursor] > 0:
        cursor += 1
    return cursor


def _play(env, counts, policy, sig, sink, episode, batch, phase) -> int:
    reached = env.play(policy)
    record_episode(counts, sig, reached)
    if sink is not None:
        sink.episode(episode, batch, sig, reached, phase)
    return reached


def lucb_t(
    env: TmdpEnv,
    config: BoundConfig,
    rng=None,
    *,
    budget: int | None = None,
    sink: EventSink | None = None,
) -> PacResult:
    """Identify a near-optimal policy: each batch plays the empirically best
    policy and the best challenger by upper confidence bound, until the
    leader's lower bound meets the challenger's upper bound within epsilon.
    """
    config = _with_schedule(config, "lucb")
    view = env.structure
    counts = CountsTable.empty(view.num_terminals)
    epsilon = config.epsilon
    episodes = 0
    cursor = 0
    t = 0
    mdp = env_mdp(env)
    sig_cache: dict[tuple[int, ...], tuple[int, ...]] = {}

    def sig_of(pol):
        s = sig_cache.get(pol.actions)
        if s is None:
            s = sig_cache[pol.actions] = view.consistent_terminals(pol)
        return s

    while True:
        t += 1
        cursor = _init_step(env, counts, cursor)
        if cursor < view.num_terminals:
            pol = view.canonical_policy_for_terminal(cursor)
            sig = sig_of(pol)
            episodes += 1
            _play(env, counts, pol, sig, sink, episodes, t, "init")
            if budget is not None and episodes >= budget:
                pi1, _ = best_empirical_policy(counts, mdp)
                return PacResult(pi1, episodes, t, False)
            continue

        emp = empirical_pass(counts, view)
        pi1 = Policy(tuple(emp.best_actions))
        sig1 = sig_of(pi1)
        m1 = min(counts.n[s] for s in sig1)
        log_term = delta_schedule(t, config)
        if config.mode == "practical":
            w1 = math.sqrt(config.c * log_term / m1)
        else:
            w1 = math.sqrt(8.0 * log_term / (3.0 * m1))
        lcb1 = min(emp.value, 1.0) - w1

        try:
            pi2, tup2 = second_max_ucb(counts, mdp, pi1, t, config, empirical=emp)
        except NoSecondPolicyError:
            if sink is not None:
                sink.stopped(StopEvent(episodes, t, sig1, lcb1, -INF))
            return PacResult(pi1, episodes, t, True)

        if sink is not None:
            sink.batch_status(t, episodes, sig1, lcb1, tup2.U)
        if lcb1 >= tup2.U - epsilon:
            if sink is not None:
                sink.stopped(StopEvent(episodes, t, sig1, lcb1, tup2.U))
            return PacResult(pi1, episodes, t, True)

        episodes += 1
        _play(env, counts, pi1, sig1, sink, episodes, t, "main")
        sig2 = sig_of(pi2)
        episodes += 1
        _play(env, counts, pi2, sig2, sink, episodes, t, "main")
        if budget is not None and episodes >= budget:
            return PacResult(pi1, episodes, t, False)


def lucb_t_uniform(
    env: TmdpEnv,
    config: BoundConfig,
    rng=None,
    *,
    budget: int | None = None,
    sink: EventSink | None = None,
) -> PacResult:
    """LUCB variant whose estimates use only the first m outcomes of every
    consistent terminal (m = the policy's play count), buying a smaller
    union bound at the price of storing all outcomes."""
    config = _with_schedule(config, "lucb_uniform")
    view = env.structure
    counts = CountsTable.empty(view.num_terminals, with_log=True)
    epsilon = config.epsilon
    episodes = 0
    cursor = 0
    t = 0
    while True:
        t += 1
        cursor = _init_step(env, counts, cursor)
        if cursor < view.num_terminals:
            pol = view.canonical_policy_for_terminal(cursor)
            sig = view.consistent_terminals(pol)
            episodes += 1
            _play(env, counts, pol, sig, sink, episodes, t, "init")
            if budget is not None and episodes >= budget:
                pi1, _ = uniform_best_policy(counts, env_mdp(env))
                return PacResult(pi1, episodes, t, False)
            continue

        mdp = env_mdp(env)
        pi1, v1 = uniform_best_policy(counts, mdp)
        sig1 = view.consistent_terminals(pi1)
        m1 = min(counts.n[s] for s in sig1)
        log_term = delta_schedule(t, config)
        if config.mode == "practical":
            w1 = math.sqrt(config.c * log_term / m1)
        else:
            w1 = math.sqrt(8.0 * log_term / (3.0 * m1))
        lcb1 = min(v1, 1.0) - w1

        try:
            pi2, tup2 = second_max_ucb_uniform(counts, mdp, pi1, t, config)
        except NoSecondPolicyError:
            if sink is not None:
                sink.stopped(StopEvent(episodes, t, sig1, lcb1, -INF))
            return PacResult(pi1, episodes, t, True)

        if sink is not None:
            sink.batch_status(t, episodes, sig1, lcb1, tup2.U)
        if lcb1 >= tup2.U - epsilon:
            if sink is not None:
                sink.stopped(StopEvent(episodes, t, sig1, lcb1, tup2.U))
            return PacResult(pi1, episodes, t, True)

        episodes += 1
        _play(env, counts, pi1, sig1, sink, episodes, t, "main")
        sig2 = view.consistent_terminals(pi2)
        episodes += 1
        _play(env, counts, pi2, sig2, sink, episodes, t, "main")
        if budget is not None and episodes >= budget:
            return PacResult(pi1, episodes, t, False)


def ucb_t(
    env: TmdpEnv,
    config: BoundConfig,
    rng=None,
    *,
    horizon: int,
    sink: EventSink | None = None,
) -> UcbResult:
    """Regret minimization: after initialization, play the policy with the
    highest upper confidence bound every episode.  Runs exactly `horizon`
    episodes, initialization included."""
    config = _with_schedule(config, "ucb")
    view = env.structure
    counts = CountsTable.empty(view.num_terminals)
    episodes = 0
    cursor = 0
    t = 0
    mdp = env_mdp(env)
    while episodes < horizon:
        t += 1
        cursor = _init_step(env, counts, cursor)
        if cursor < view.num_terminals:
            pol = view.canonical_policy_for_terminal(cursor)
            sig = view.consistent_terminals(pol)
            episodes += 1
            _play(env, counts, pol, sig, sink, episodes, t, "init")
            continue
        pol, _ = find_max_ucb(counts, mdp, t, config)
        sig = view.consistent_terminals(pol)
        episodes += 1
        _play(env, counts, pol, sig, sink, episodes, t, "main")
    return UcbResult(episodes=episodes)


# -- structure-blind baseline ------------------------------------------------

ARM_GUARD = 1 << 16


class ArmCountError(RuntimeError):
    """Too many arms to run the structure-blind baseline."""


def flat_lucb(
    env: TmdpEnv,
    config: BoundConfig,
    rng=None,
    *,
    budget: int | None = None,
    sink: EventSink | None = None,
) -> PacResult:
    """Baseline that treats every total assignment of legal actions as an
    independent bandit arm with its own mean of observed returns; no data is
    shared between arms.  Width: the classic Hoeffding form
    sqrt(L / (2 m)) with L = ln(3/delta) + ln(#arms) + 4 ln t in theory
    mode, or the simplified sqrt(C ln(t/delta) / m) in practical mode.
    """
    from .oracle import enumerate_legal_assignments  # local: avoids cycle

    view = env.structure
    mdp = env_mdp(env)
    arms = enumerate_legal_assignments(mdp)
    if len(arms) > ARM_GUARD:
        raise ArmCountError(f"{len(arms)} arms exceed the guard {ARM_GUARD}")
    sigs = [view.consistent_terminals(p) for p in arms]
    rho = view.rho

    config = _with_schedule(config, "flat", num_arms=len(arms))
    epsilon = config.epsilon
    k = len(arms)
    pulls = np.zeros(k, dtype=np.int64)
    sums = np.zeros(k, dtype=np.float64)
    episodes = 0
    t = 0

    def pull(i, phase, batch):
        nonlocal episodes
        reached = env.play(arms[i])
        pulls[i] += 1
        sums[i] += rho[reached]
        episodes += 1
        if sink is not None:
            sink.episode(episodes, batch, sigs[i], reached, phase)

    while True:
        t += 1
        if episodes < k:
            pull(episodes, "init", t)
            if budget is not None and episodes >= budget:
                means = sums / np.maximum(pulls, 1)
                return PacResult(arms[int(np.argmax(means))], episodes, t, False)
            continue
        means = sums / pulls
        log_term = delta_schedule(t, config)
        if config.mode == "practical":
            widths = np.sqrt(config.c * log_term / pulls)
        else:
            widths = np.sqrt(log_term / (2.0 * pulls))
        i1 = int(np.argmax(means))
        ucbs = means + widths
        ucbs[i1] = -INF
        i2 = int(np.argmax(ucbs))
        lcb1 = means[i1] - widths[i1]
        if sink is not None:
            sink.batch_status(t, episodes, sigs[i1], lcb1, float(ucbs[i2]))
        if lcb1 >= ucbs[i2] - epsilon:
            if sink is not None:
                sink.stopped(
                    StopEvent(episodes, t, sigs[i1], float(lcb1), float(ucbs[i2]))
                )
            return PacResult(arms[i1], episodes, t, True)
        pull(i1, "main", t)
        pull(i2, "main", t)
        if budget is not None and episodes >= budget:
            return PacResult(arms[i1], episodes, t, False)


def env_mdp(env: TmdpEnv):
    """The environment's tree handle for planning.

    Planner passes consume only the structure view and terminal returns;
    transition probabilities are never read on the learning path.
    """
    return env._mdp
