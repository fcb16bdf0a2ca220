import math
import random

import numpy as np
import pytest

import treebandit as tb
from treebandit.estimator import BoundConfig, CountsTable
from treebandit.oracle import (
    EnumerationGuardError,
    InfeasibleScheduleError,
    brute_force_max_ucb,
    count_policy_classes,
    coverage_test,
    enumerate_legal_assignments,
    enumerate_policy_classes,
    gap_report,
    gap_report_csv,
    optimal_value,
)
from treebandit.tree import TreeBuilder

from helpers import random_tree, two_class_tree


def test_root_only_tree_has_one_class_per_action():
    b = TreeBuilder()
    s = b.state()
    for a in range(4):
        b.edge(s, a, b.terminal(), terminal=True, p=1.0, r=0.1 * a)
    b.root(s)
    mdp = b.build()
    assert count_policy_classes(mdp) == 4
    assert len(enumerate_policy_classes(mdp)) == 4


def test_enumeration_yields_distinct_signatures(rng):
    for _ in range(30):
        mdp = random_tree(rng, max_depth=3, multi_root=True)
        if count_policy_classes(mdp) > 4096:
            continue
        reps = enumerate_policy_classes(mdp)
        sigs = {tb.consistent_terminals(mdp, p) for p in reps}
        assert len(sigs) == len(reps) == count_policy_classes(mdp)


def test_guard_refuses_leduc():
    from treebandit import games

    spec = games.GameSpec("leduc", "x")
    mdp = games.compile(spec, games.builtin_opponent(spec, "uniform"))
    with pytest.raises(EnumerationGuardError):
        enumerate_policy_classes(mdp)
    with pytest.raises(EnumerationGuardError):
        enumerate_legal_assignments(mdp)


def test_gap_report_two_class_tree():
    report = gap_report(two_class_tree(0.8, 0.5), epsilon=0.1)
    assert report.optimal_value == pytest.approx(0.8)
    assert report.second_value == pytest.approx(0.5)
    idx_star = report.star_class
    idx_other = 1 - idx_star
    assert report.delta[idx_other] == pytest.approx(0.3)
    assert report.delta[idx_star] == pytest.approx(0.3)
    assert report.delta_eps[idx_star] == pytest.approx(0.3)
    assert report.delta_eps[idx_other] == pytest.approx(0.3)


def test_gap_report_all_equal_classes():
    b = TreeBuilder()
    s = b.state()
    b.edge(s, 0, b.terminal(), terminal=True, p=1.0, r=0.4)
    b.edge(s, 1, b.terminal(), terminal=True, p=1.0, r=0.4)
    b.root(s)
    report = gap_report(b.build(), epsilon=0.25)
    assert report.delta[report.star_class] == pytest.approx(0.0)
    assert all(d == pytest.approx(0.25) for d in report.delta_eps_sigma)


def test_gap_report_internal_invariants(kuhn3_nash):
    report = gap_report(kuhn3_nash, epsilon=0.1)
    assert all(d >= 0 for d in report.delta)
    assert report.delta[report.star_class] == pytest.approx(
        report.optimal_value - report.second_value
    )
    for d, de in zip(report.delta, report.delta_eps):
        assert de == pytest.approx(max(d, report.epsilon))
    for t in range(len(report.delta_eps_sigma)):
        lo, hi = report.delta_min_sigma[t], report.delta_max_sigma[t]
        if lo is None:
            assert hi is None
        else:
            assert lo <= hi + 1e-15


def test_gap_report_kuhn3_nash_fixture(kuhn3_nash):
    # exact optimum 35/72; eight co-optimal classes out of twenty-seven.
    # Per-card penalties (raw): calling with the jack after check-bid costs
    # 1/2, bidding the queen costs 1/6, folding the king costs 1/2; each
    # enters a class gap as penalty/3 normalized by the 4-unit range, so the
    # distinct gaps are {1/72, 1/24, 1/18, 1/12, 7/72}.
    report = gap_report(kuhn3_nash, epsilon=0.1)
    assert len(report.classes) == 27
    assert report.optimal_value == pytest.approx(35.0 / 72.0, abs=1e-12)
    assert len(report.optimal_classes) == 8
    assert report.second_value == pytest.approx(report.optimal_value, abs=1e-12)
    nonzero = sorted({round(d, 9) for d in report.delta if d > 1e-12})
    expected = [1.0 / 72.0, 1.0 / 24.0, 1.0 / 18.0, 1.0 / 12.0, 7.0 / 72.0]
    assert nonzero == pytest.approx(expected, abs=1e-9)


def test_gap_report_order_invariant(kuhn3_nash):
    a = gap_report(kuhn3_nash, epsilon=0.1)
    b = gap_report(kuhn3_nash, epsilon=0.1)
    assert a.values == b.values
    assert a.delta_eps_sigma == b.delta_eps_sigma


def test_gap_report_csv_schema():
    report = gap_report(two_class_tree(), epsilon=0.1)
    cls_csv, term_csv = gap_report_csv(report)
    assert cls_csv.splitlines()[0] == "class_id,value,delta,delta_eps"
    assert term_csv.splitlines()[0] == "terminal_id,delta_eps_sigma,delta_min,delta_max"


def test_undefined_markers_when_all_consistent_policies_optimal():
    # a terminal shared by every policy: its policy set is all of them,
    # including the optimum, while a strictly dominated sibling class exists
    b = TreeBuilder()
    root = b.state()
    mid = b.state()
    b.edge(root, 0, b.terminal(), terminal=True, p=0.5, r=0.9)  # t0 shared
    b.edge(root, 0, mid, terminal=False, p=0.5, r=0.0)
    b.edge(mid, 0, b.terminal(), terminal=True, p=1.0, r=0.8)
    b.edge(mid, 1, b.terminal(), terminal=True, p=1.0, r=0.1)
    b.root(root)
    report = gap_report(b.build(), epsilon=0.05)
    assert report.delta_min_sigma[0] is not None  # t0 is crossed by both classes
    # the winning subtree terminal belongs only to the optimal class
    t_opt = 1
    assert report.delta_min_sigma[t_opt] is None
    assert report.delta_max_sigma[t_opt] is None


def test_brute_force_sentinel_prefers_unplayed_class():
    mdp = two_class_tree()
    counts = CountsTable.empty(2)
    counts.n = [50, 0]
    counts.n_plus = [50, 0]
    cfg = BoundConfig(mode="theory", schedule="fixed", delta=0.1)
    pol, u = brute_force_max_ucb(counts, mdp, 51, cfg)
    assert u == float("inf")
    assert tb.consistent_terminals(mdp, pol) == (1,)


def test_optimal_value_matches_enumeration(rng):
    for _ in range(40):
        mdp = random_tree(rng, max_depth=3, multi_root=True)
        if count_policy_classes(mdp) > 4096:
            continue
        best = max(
            tb.evaluate_terminal_sum(mdp, p) for p in enumerate_policy_classes(mdp)
        )
        assert optimal_value(mdp) == pytest.approx(best, abs=1e-12)


# -- coverage ----------------------------------------------------------------


def test_coverage_zero_on_deterministic_tree():
    b = TreeBuilder()
    s = b.state()
    b.edge(s, 0, b.terminal(), terminal=True, p=1.0, r=0.5)
    b.edge(s, 1, b.terminal(), terminal=True, p=1.0, r=0.3)
    b.root(s)
    mdp = b.build()
    pi = tb.Policy((0,))
    schedule = [pi] * 20
    up, lo = coverage_test(mdp, pi, schedule, delta=0.2, replications=500,
                           rng=np.random.default_rng(0))
    assert up == 0.0
    assert lo == 0.0


def test_coverage_infeasible_schedule_rejected(kuhn3_uniform):
    mdp = kuhn3_uniform
    pi = tb.Policy(tuple(0 for _ in mdp.states))
    other = tb.Policy(tuple(1 if s.level == 1 else 0 for s in mdp.states))
    with pytest.raises(InfeasibleScheduleError):
        coverage_test(mdp, pi, [other] * 5, delta=0.1, replications=100,
                      rng=np.random.default_rng(0))


def test_coverage_within_nominal_small(kuhn3_uniform):
    mdp = kuhn3_uniform
    pi = tb.Policy(tuple(0 for _ in mdp.states))
    schedule = [pi] * 40
    up, lo = coverage_test(mdp, pi, schedule, delta=0.2, replications=2000,
                           rng=np.random.default_rng(1))
    slack = 3 * math.sqrt(0.2 * 0.8 / 2000)
    assert up <= 0.2 + slack
    assert lo <= 0.2 + slack
