"""Brute-force ground truth for small instances.

Everything here is enumeration or Monte Carlo against the true model:
policy-class listing, exact values and gap quantities, exhaustive UCB
maximization (the planner's correctness oracle), and empirical coverage
checks of the confidence bounds under replayed play schedules.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .estimator import BoundConfig, CountsTable, beta, delta_schedule, play_count
from .tree import Policy, TreeMdp

CLASS_GUARD = 1 << 16


class EnumerationGuardError(RuntimeError):
    """The instance has too many policy classes to enumerate exactly."""


def count_policy_classes(mdp: TreeMdp) -> int:
    """Number of distinct consistent-terminal sets, by subtree product."""
    view = mdp.structure()
    counts = [0] * view.num_states
    for sid in view.order_bottom_up:
        total = 0
        for kids in view.children[sid]:
            prod = 1
            for cid, is_term in kids:
                if not is_term:
                    prod *= counts[cid]
            total += prod
        counts[sid] = total
    out = 1
    for rid in view.root_ids:
        out *= counts[rid]
    return out


def enumerate_policy_classes(mdp: TreeMdp) -> list[Policy]:
    """One representative per distinct consistent-terminal set, depth-first
    over reachable states, off-path states pinned to action 0."""
    n_classes = count_policy_classes(mdp)
    if n_classes > CLASS_GUARD:
        raise EnumerationGuardError(
            f"{n_classes} policy classes exceed the enumeration guard {CLASS_GUARD}"
        )
    view = mdp.structure()

    def subtree(sid: int) -> list[dict[int, int]]:
        out = []
        for a, kids in enumerate(view.children[sid]):
            partials = [{sid: a}]
            for cid, is_term in kids:
                if is_term:
                    continue
                extended = []
                for sub in subtree(cid):
                    for p in partials:
                        q = dict(p)
                        q.update(sub)
                        extended.append(q)
                partials = extended
            out.extend(partials)
        return out

    combos = [dict()]
    for rid in view.root_ids:
        combos = [
            {**c, **sub} for c in combos for sub in subtree(rid)
        ]
    reps = []
    for assignment in combos:
        actions = [0] * view.num_states
        for sid, a in assignment.items():
            actions[sid] = a
        reps.append(Policy(tuple(actions)))
    return reps


def count_legal_assignments(mdp: TreeMdp) -> int:
    """Number of distinct total assignments of legal actions (the arm count
    of a structure-blind baseline; off-path duplicates not collapsed)."""
    out = 1
    for s in mdp.states:
        out *= max(s.num_actions, 1)
        if out > CLASS_GUARD * 1024:
            return out
    return out


def enumerate_legal_assignments(mdp: TreeMdp) -> list[Policy]:
    total = count_legal_assignments(mdp)
    if total > CLASS_GUARD:
        raise EnumerationGuardError(
            f"{total} action assignments exceed the enumeration guard {CLASS_GUARD}"
        )
    policies = [()]
    for s in mdp.states:
        policies = [p + (a,) for p in policies for a in range(s.num_actions)]
    return [Policy(p) for p in policies]


def optimal_value(mdp: TreeMdp) -> float:
    """Best-response value over all policies, by bottom-up maximization with
    the true reach probabilities (no enumeration needed)."""
    view = mdp.structure()
    profiles = mdp.profiles()
    contrib = [profiles.q[t] * profiles.rho[t] for t in range(view.num_terminals)]
    g = [0.0] * view.num_states
    for sid in view.order_bottom_up:
        g[sid] = max(
            sum(contrib[cid] if is_term else g[cid] for cid, is_term in kids)
            for kids in view.children[sid]
        )
    return sum(g[r] for r in view.root_ids)


# -- gap report -----------------------------------------------------------

UNDEFINED = None  # marker for gaps over empty policy sets


@dataclass(frozen=True)
class GapReport:
    """Exact values and gap quantities for every policy class."""

    classes: tuple[Policy, ...]
    signatures: tuple[tuple[int, ...], ...]
    values: tuple[float, ...]
    optimal_value: float
    optimal_classes: tuple[int, ...]
    star_class: int
    second_value: float
    delta: tuple[float, ...]
    delta_eps: tuple[float, ...]
    delta_eps_sigma: tuple[float, ...]
    delta_min_sigma: tuple[float | None, ...]
    delta_max_sigma: tuple[float | None, ...]
    epsilon: float

    def class_of(self, sig: tuple[int, ...]) -> int:
        return self._by_sig[sig]

    def __post_init__(self):
        object.__setattr__(
            self, "_by_sig", {s: i for i, s in enumerate(self.signatures)}
        )


VALUE_TIE_TOL = 1e-12


def gap_report(mdp: TreeMdp, epsilon: float) -> GapReport:
    view = mdp.structure()
    profiles = mdp.profiles()
    reps = enumerate_policy_classes(mdp)
    sigs = [view.consistent_terminals(p) for p in reps]
    values = [sum(profiles.q[t] * profiles.rho[t] for t in s) for s in sigs]

    vstar = max(values)
    opt = tuple(i for i, v in enumerate(values) if vstar - v <= VALUE_TIE_TOL)
    star = opt[0]
    second = max(
        (v for i, v in enumerate(values) if i != star), default=vstar
    )
    delta = tuple(
        (vstar - second) if i == star else (vstar - values[i])
        for i in range(len(reps))
    )
    delta_eps = tuple(max(d, epsilon) for d in delta)

    n_term = view.num_terminals
    des = [math.inf] * n_term
    dmin: list[float | None] = [None] * n_term
    dmax: list[float | None] = [None] * n_term
    opt_set = set(opt)
    for i, s in enumerate(sigs):
        for t in s:
            if delta_eps[i] < des[t]:
                des[t] = delta_eps[i]
            if i not in opt_set:
                if dmin[t] is None or delta[i] < dmin[t]:
                    dmin[t] = delta[i]
                if dmax[t] is None or delta[i] > dmax[t]:
                    dmax[t] = delta[i]

    return GapReport(
        classes=tuple(reps),
        signatures=tuple(sigs),
        values=tuple(values),
        optimal_value=vstar,
        optimal_classes=opt,
        star_class=star,
        second_value=second,
        delta=delta,
        delta_eps=delta_eps,
        delta_eps_sigma=tuple(des),
        delta_min_sigma=tuple(dmin),
        delta_max_sigma=tuple(dmax),
        epsilon=epsilon,
    )


def gap_report_csv(report: GapReport) -> tuple[str, str]:
    """(class table, terminal table) per the export schema."""
    cls = ["class_id,value,delta,delta_eps"]
    for i in range(len(report.classes)):
        cls.append(
            f"{i},{report.values[i]!r},{report.delta[i]!r},{report.delta_eps[i]!r}"
        )
    term = ["terminal_id,delta_eps_sigma,delta_min,delta_max"]
    for t in range(len(report.delta_eps_sigma)):
        dmin = report.delta_min_sigma[t]
        dmax = report.delta_max_sigma[t]
        term.append(
            f"{t},{report.delta_eps_sigma[t]!r},"
            f"{'undefined' if dmin is None else repr(dmin)},"
            f"{'undefined' if dmax is None else repr(dmax)}"
        )
    return "\n".join(cls) + "\n", "\n".join(term) + "\n"


# -- brute-force UCB maximization ------------------------------------------


def brute_force_max_ucb(
    counts: CountsTable, mdp: TreeMdp, t: int, config: BoundConfig
) -> tuple[Policy, float]:
    """Exact argmax of the upper confidence bound over all policy classes."""
    view = mdp.structure()
    rho = view.rho
    log_term = delta_schedule(t, config)
    best = None
    for pol in enumerate_policy_classes(mdp):
        sig = view.consistent_terminals(pol)
        val = sum(
            (counts.n_plus[s] / counts.n[s] * rho[s]) if counts.n[s] else 0.0
            for s in sig
        )
        u = val + beta(play_count(counts, sig), log_term, config)
        if best is None or u > best[1]:
            best = (pol, u)
    return best


def brute_force_max_ucb_uniform(
    counts: CountsTable, mdp: TreeMdp, t: int, config: BoundConfig
) -> tuple[Policy, float]:
    """Exact argmax of the uniform-estimate UCB over all policy classes."""
    view = mdp.structure()
    rho = view.rho
    log = counts.log
    log_term = delta_schedule(t, config)
    best = None
    for pol in enumerate_policy_classes(mdp):
        sig = view.consistent_terminals(pol)
        m = play_count(counts, sig)
        if m == 0:
            u = math.inf
        else:
            val = sum(log.head_sum(s, m) / m * rho[s] for s in sig)
            u = val + beta(m, log_term, config)
        if best is None or u > best[1]:
            best = (pol, u)
    return best


# -- coverage ---------------------------------------------------------------


class InfeasibleScheduleError(ValueError):
    """The play schedule leaves the audited policy without full coverage."""


def coverage_test(
    mdp: TreeMdp,
    policy: Policy,
    schedule: list[Policy],
    delta: float,
    replications: int,
    rng: np.random.Generator,
) -> tuple[float, float]:
    """Replay a fixed policy schedule and measure how often the audited
    policy's value escapes its confidence interval.

    The counts ``n`` are deterministic functions of the schedule (consistency
    does not depend on outcomes), so this realizes exactly the fixed-count
    scenario of the bound; only the success counts are random.  Returns
    (upper-violation rate, lower-violation rate): the fractions of runs with
    V >= ucb and V <= lcb.
    """
    view = mdp.structure()
    profiles = mdp.profiles()
    n_term = view.num_terminals

    sigs = [view.consistent_terminals(p) for p in schedule]
    n = np.zeros(n_term, dtype=np.int64)
    for s in sigs:
        n[list(s)] += 1
    target = view.consistent_terminals(policy)
    if any(n[t] == 0 for t in target):
        raise InfeasibleScheduleError(
            "schedule never plays some terminal consistent with the policy"
        )

    # Sample each scheduled episode's terminal directly from the true
    # distribution over the played policy's consistent set (equivalent to
    # walking the tree) and accumulate success counts per replication.
    n_plus = np.zeros((replications, n_term), dtype=np.int64)
    for s in sigs:
        idx = np.array(s)
        probs = np.array([profiles.q[t] for t in s])
        probs = probs / probs.sum()
        draws = rng.choice(len(idx), size=replications, p=probs)
        np.add.at(n_plus, (np.arange(replications), idx[draws]), 1)

    t_idx = np.array(target)
    rho = np.array([profiles.rho[t] for t in target])
    v_hat = (n_plus[:, t_idx] / n[t_idx] * rho).sum(axis=1)

    config = BoundConfig(mode="theory", schedule="fixed", delta=delta)
    m = int(n[t_idx].min())
    width = beta(m, math.log(1.0 / delta), config)
    v_true = sum(profiles.q[t] * profiles.rho[t] for t in target)

    upper = float(np.mean(v_true >= v_hat + width))
    lower = float(np.mean(v_true <= np.minimum(v_hat, 1.0) - width))
    return upper, lower
