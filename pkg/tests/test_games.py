import pytest

import treebandit as tb
from treebandit import games
from treebandit.games import CompileError, GameSpec, OpponentStrategy, StrategyFormatError
from treebandit.oracle import (
    count_legal_assignments,
    count_policy_classes,
    enumerate_policy_classes,
    optimal_value,
)

from helpers import expectimax_policy_value, expectimax_value, random_policy

GAME_VALUE = 1.0 / 18.0  # first player loses one eighteenth per hand


def compiled(game_id, role, kind="uniform", alpha=1.0 / 3.0):
    spec = GameSpec(game_id, role)
    opp = games.builtin_opponent(spec, kind, alpha=alpha)
    return spec, opp, games.compile(spec, opp)


# -- cardinalities ----------------------------------------------------------


@pytest.mark.parametrize(
    "game_id,role,states,terminals,horizon",
    [
        ("kuhn3", "x", 6, 15, 2),
        ("kuhn3", "o", 6, 15, 1),
        ("kuhn5", "x", 10, 25, 2),
        ("kuhn5", "o", 10, 25, 1),
        ("leduc", "x", 144, 417, 4),
        # the second seat mirrors the first by construction
        ("leduc", "o", 144, 417, 4),
    ],
)
def test_compiled_cardinalities(game_id, role, states, terminals, horizon):
    _, _, mdp = compiled(game_id, role)
    meta = mdp.meta
    assert meta.num_states == states
    assert meta.num_terminals == terminals
    assert meta.horizon == horizon
    assert tb.validate(mdp) == []


def test_action_alphabets():
    assert GameSpec("kuhn3").num_actions == 4
    assert GameSpec("kuhn5").num_actions == 4
    assert GameSpec("leduc").num_actions == 5
    assert GameSpec("leduc").action_names == ("check", "bid", "call", "raise", "fold")


def test_policy_space_sizes():
    _, _, k3 = compiled("kuhn3", "x")
    assert count_legal_assignments(k3) == 64
    # distinct consistent-terminal classes collapse second-round choices
    # behind a first-round bid: three per card
    assert count_policy_classes(k3) == 27
    _, _, k5 = compiled("kuhn5", "x")
    assert count_legal_assignments(k5) == 1024
    assert count_policy_classes(k5) == 243
    _, _, k3o = compiled("kuhn3", "o")
    assert count_policy_classes(k3o) == 64
    _, _, k5o = compiled("kuhn5", "o")
    assert count_policy_classes(k5o) == 1024


def test_consistent_set_sizes_kuhn3(kuhn3_uniform, rng):
    for _ in range(10):
        pi = random_policy(rng, kuhn3_uniform)
        assert len(tb.consistent_terminals(kuhn3_uniform, pi)) == 6


# -- opponents ---------------------------------------------------------------


def test_uniform_strategy_is_half_half_on_kuhn3():
    spec = GameSpec("kuhn3", "x")
    opp = games.builtin_opponent(spec, "uniform")
    assert len(opp.table) == 6
    for dist in opp.table.values():
        assert set(dist.values()) == {0.5}


def test_builtin_strategies_are_valid_distributions():
    for game_id in ("kuhn3", "kuhn5", "leduc"):
        for role in ("x", "o"):
            spec = GameSpec(game_id, role)
            opp = games.builtin_opponent(spec, "uniform")
            for dist in opp.table.values():
                assert abs(sum(dist.values()) - 1.0) <= 1e-9
    for role in ("x", "o"):
        spec = GameSpec("kuhn3", role)
        for alpha in (0.0, 0.2, 1.0 / 3.0):
            opp = games.builtin_opponent(spec, "kuhn_nash", alpha=alpha)
            for dist in opp.table.values():
                assert abs(sum(dist.values()) - 1.0) <= 1e-9


def test_kuhn_nash_only_for_kuhn3():
    with pytest.raises(ValueError):
        games.builtin_opponent(GameSpec("kuhn5", "x"), "kuhn_nash")
    with pytest.raises(ValueError):
        games.builtin_opponent(GameSpec("kuhn3", "x"), "kuhn_nash", alpha=0.5)


def test_best_response_to_equilibrium_achieves_game_value():
    # against the second player's equilibrium, the best response earns
    # exactly the game value; same for the first player's family, any alpha
    for alpha in (0.0, 1.0 / 6.0, 1.0 / 3.0):
        spec, opp, mdp = compiled("kuhn3", "x", "kuhn_nash", alpha)
        assert optimal_value(mdp) == pytest.approx(
            (-GAME_VALUE + 2.0) / 4.0, abs=1e-12
        )
        raw = expectimax_value(spec.game, "x", opp)
        assert raw == pytest.approx(-GAME_VALUE, abs=1e-12)

        spec, opp, mdp = compiled("kuhn3", "o", "kuhn_nash", alpha)
        assert optimal_value(mdp) == pytest.approx(
            (GAME_VALUE + 2.0) / 4.0, abs=1e-12
        )
        raw = expectimax_value(spec.game, "o", opp)
        assert raw == pytest.approx(GAME_VALUE, abs=1e-12)


def test_compiled_policy_values_match_raw_game_replay(rng):
    # the compiled transition probabilities and expected terminal returns
    # reproduce exact expectations of the raw game, policy by policy
    for game_id, role, kind in [
        ("kuhn3", "x", "kuhn_nash"),
        ("kuhn3", "o", "kuhn_nash"),
        ("kuhn5", "o", "uniform"),
        ("leduc", "x", "uniform"),
    ]:
        spec, opp, mdp = compiled(game_id, role, kind)
        span = spec.u_max - spec.u_min
        for _ in range(5):
            pi = random_policy(rng, mdp)
            raw = expectimax_policy_value(spec.game, role, opp, mdp, pi)
            norm = tb.evaluate_terminal_sum(mdp, pi)
            assert norm == pytest.approx((raw - spec.u_min) / span, abs=1e-10)


def test_normalization_preserves_best_response_sets(kuhn3_nash):
    # affine return scaling keeps the argmax set: classes optimal for the
    # normalized tree are exactly those achieving the raw best response
    spec = GameSpec("kuhn3", "x")
    opp = games.builtin_opponent(spec, "kuhn_nash", alpha=1.0 / 3.0)
    mdp = kuhn3_nash
    classes = enumerate_policy_classes(mdp)
    vstar = optimal_value(mdp)
    norm_opt = set()
    for i, pol in enumerate(classes):
        if vstar - tb.evaluate_terminal_sum(mdp, pol) <= 1e-12:
            norm_opt.add(tb.consistent_terminals(mdp, pol))
    raw_star = expectimax_value(spec.game, "x", opp)
    raw_opt = set()
    for pol in classes:
        raw = expectimax_policy_value(spec.game, "x", opp, mdp, pol)
        if raw_star - raw <= 1e-12 * 4:
            raw_opt.add(tb.consistent_terminals(mdp, pol))
    assert norm_opt == raw_opt


def test_all_reach_probabilities_positive_under_full_support(kuhn3_uniform):
    assert all(q > 0 for q in kuhn3_uniform.profiles().q)


def test_partition_inherited_under_uniform(kuhn3_uniform, rng):
    prof = kuhn3_uniform.profiles()
    for _ in range(10):
        pi = random_policy(rng, kuhn3_uniform)
        total = sum(prof.q[t] for t in tb.consistent_terminals(kuhn3_uniform, pi))
        assert abs(total - 1.0) <= 1e-9


# -- strategy files ----------------------------------------------------------


def test_strategy_round_trip(tmp_path):
    spec = GameSpec("kuhn3", "x")
    opp = games.builtin_opponent(spec, "uniform")
    path = tmp_path / "opp.txt"
    games.save_strategy(opp, path)
    loaded = games.load_strategy(path)
    assert loaded.table == opp.table


def test_strategy_sum_violation_reports_infoset():
    text = "J:k check 0.5\nJ:k bid 0.3\n"
    with pytest.raises(StrategyFormatError, match="J:k"):
        games.loads_strategy(text)


def test_strategy_parse_error_reports_line():
    with pytest.raises(StrategyFormatError, match="line 2"):
        games.loads_strategy("J:k check 1.0\nJ:k bid\n")


def test_missing_infoset_fails_compile_with_key():
    spec = GameSpec("kuhn3", "x")
    opp = games.builtin_opponent(spec, "uniform")
    table = dict(opp.table)
    del table["Q:b"]
    with pytest.raises(CompileError, match="Q:b"):
        games.compile(spec, OpponentStrategy(table))


def test_illegal_action_name_fails_compile():
    spec = GameSpec("kuhn3", "x")
    opp = games.builtin_opponent(spec, "uniform")
    table = dict(opp.table)
    table["Q:b"] = {"raise": 1.0}
    with pytest.raises(CompileError, match="Q:b"):
        games.compile(spec, OpponentStrategy(table))


def test_comments_and_blank_lines_ignored():
    text = "# a comment\n\nJ:k check 0.25\nJ:k bid 0.75\n"
    strat = games.loads_strategy(text)
    assert strat.table == {"J:k": {"check": 0.25, "bid": 0.75}}


def test_zero_support_branches_are_pruned():
    # an opponent that never bids removes the facing-bid subtrees entirely
    spec = GameSpec("kuhn3", "x")
    table = {
        "J:k": {"check": 1.0, "bid": 0.0},
        "Q:k": {"check": 1.0, "bid": 0.0},
        "K:k": {"check": 1.0, "bid": 0.0},
        "J:b": {"call": 0.0, "fold": 1.0},
        "Q:b": {"call": 0.0, "fold": 1.0},
        "K:b": {"call": 0.0, "fold": 1.0},
    }
    mdp = games.compile(spec, OpponentStrategy(table))
    assert tb.validate(mdp) == []
    assert mdp.meta.num_states == 3  # the second-round states disappear
    assert all(q > 0 for q in mdp.profiles().q)
