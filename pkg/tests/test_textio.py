import random

import pytest

from treebandit import textio
from treebandit.tree import TreeError

from helpers import random_tree


def test_round_trip_exact_floats(rng):
    for _ in range(40):
        mdp = random_tree(rng, multi_root=True)
        text = textio.dumps(mdp)
        loaded = textio.loads(text)
        assert textio.dumps(loaded) == text
        assert loaded.gamma == mdp.gamma
        assert loaded.num_states == mdp.num_states
        for a, b in zip(loaded.profiles().rho, mdp.profiles().rho):
            assert a == b
        for a, b in zip(loaded.profiles().q, mdp.profiles().q):
            assert a == b


def test_round_trip_compiled_game(kuhn3_nash):
    text = textio.dumps(kuhn3_nash)
    loaded = textio.loads(text)
    assert textio.dumps(loaded) == text


def test_file_round_trip(tmp_path, rng):
    mdp = random_tree(rng)
    path = tmp_path / "tree.txt"
    textio.dump(mdp, path)
    assert textio.dumps(textio.load(path)) == textio.dumps(mdp)


def test_single_root_record_is_plain():
    mdp = random_tree(random.Random(0), multi_root=False)
    assert "\nroot 0\n" in textio.dumps(mdp) or textio.dumps(mdp).endswith("root 0\n")


def test_parse_error_reports_line():
    with pytest.raises(TreeError, match="line 3"):
        textio.loads("gamma 1.0\nnode 0 level 1\nedge 0 zero 1 p=1.0 r=0.0\n")


def test_unknown_record_rejected():
    with pytest.raises(TreeError, match="unknown record"):
        textio.loads("widget 4\n")


def test_bad_probability_sum_rejected():
    text = (
        "gamma 1.0\n"
        "node 0 level 1\n"
        "terminal 1 rho=0.5\n"
        "terminal 2 rho=0.5\n"
        "edge 0 0 1 p=0.6 r=0.5\n"
        "edge 0 0 2 p=0.3 r=0.5\n"
        "root 0\n"
    )
    with pytest.raises(TreeError, match="probability normalization"):
        textio.loads(text)


def test_inconsistent_declared_rho_rejected():
    text = (
        "gamma 1.0\n"
        "node 0 level 1\n"
        "terminal 1 rho=0.9\n"
        "edge 0 0 1 p=1.0 r=0.5\n"
        "root 0\n"
    )
    with pytest.raises(TreeError, match="path rewards"):
        textio.loads(text)
