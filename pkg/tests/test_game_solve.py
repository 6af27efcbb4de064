"""Solver unit tests: dominance, ties, Nature expectation, simultaneous
blocks, and cross-validation of the one-shot deviation checker against brute
force."""

from fractions import Fraction

import pytest

from loanlab.game import (
    GameNode,
    GameTree,
    Leaf,
    MalformedGame,
    NoPureEquilibrium,
    Player,
    is_spe,
    solve_spe,
)
from conftest import brute_force_is_spe

F = Fraction


def leaf(l, b):
    return Leaf(utilities=(F(l), F(b)))


def test_single_leaf_tree():
    tree = GameTree(leaf(3, 4))
    solutions = solve_spe(tree)
    assert solutions == [(F(3), F(4), {})]


def test_strict_dominance():
    node = GameNode(
        owner=Player.LENDER,
        info_set="root",
        edges=(("good", leaf(0, 0)), ("bad", leaf(-1, 0))),
    )
    solutions = solve_spe(GameTree(node))
    assert len(solutions) == 1
    assert solutions[0][2] == {"root": "good"}


def test_ties_enumerate_all_profiles():
    node = GameNode(
        owner=Player.LENDER,
        info_set="root",
        edges=(("a", leaf(1, 5)), ("b", leaf(1, 0))),
    )
    solutions = solve_spe(GameTree(node))
    assert {s[2]["root"] for s in solutions} == {"a", "b"}
    assert {(s[0], s[1]) for s in solutions} == {(F(1), F(5)), (F(1), F(0))}


def test_nature_expectation():
    chance = GameNode(
        owner=Player.NATURE,
        info_set="chance",
        edges=(("heads", leaf(2, 0)), ("tails", leaf(0, 4))),
        probs=(F(1, 3), F(2, 3)),
    )
    solutions = solve_spe(GameTree(chance))
    assert solutions[0][:2] == (F(2, 3), F(8, 3))


def test_nature_weights_must_sum_to_one():
    chance = GameNode(
        owner=Player.NATURE,
        info_set="chance",
        edges=(("heads", leaf(1, 0)), ("tails", leaf(0, 1))),
        probs=(F(1, 2), F(1, 3)),
    )
    with pytest.raises(MalformedGame):
        GameTree(chance)


def simultaneous_block(payoffs):
    """payoffs[(row, col)] = (lender, borrower); borrower rows, lender cols."""

    def lender_node(row):
        return GameNode(
            owner=Player.LENDER,
            info_set="block.lender",
            edges=(
                ("left", leaf(*payoffs[(row, "left")])),
                ("right", leaf(*payoffs[(row, "right")])),
            ),
        )

    return GameNode(
        owner=Player.BORROWER,
        info_set="block.borrower",
        edges=(("up", lender_node("up")), ("down", lender_node("down"))),
    )


def test_simultaneous_block_prisoners_dilemma():
    # defect strictly dominates for both
    payoffs = {
        ("up", "left"): (3, 3),
        ("up", "right"): (4, 0),
        ("down", "left"): (0, 4),
        ("down", "right"): (1, 1),
    }
    tree = GameTree(simultaneous_block(payoffs))
    assert tree.is_simultaneous_block(tree.root)
    solutions = solve_spe(tree)
    assert len(solutions) == 1
    assert solutions[0][2] == {"block.borrower": "down", "block.lender": "right"}
    assert solutions[0][:2] == (F(1), F(1))


def test_simultaneous_block_coordination_returns_both():
    payoffs = {
        ("up", "left"): (2, 2),
        ("up", "right"): (0, 0),
        ("down", "left"): (0, 0),
        ("down", "right"): (1, 1),
    }
    solutions = solve_spe(GameTree(simultaneous_block(payoffs)))
    found = {(s[2]["block.borrower"], s[2]["block.lender"]) for s in solutions}
    assert found == {("up", "left"), ("down", "right")}


def test_matching_pennies_has_no_pure_equilibrium():
    payoffs = {
        ("up", "left"): (1, -1),
        ("up", "right"): (-1, 1),
        ("down", "left"): (-1, 1),
        ("down", "right"): (1, -1),
    }
    with pytest.raises(NoPureEquilibrium):
        solve_spe(GameTree(simultaneous_block(payoffs)))


def test_is_spe_flags_deviation_with_gain():
    inner = GameNode(
        owner=Player.BORROWER,
        info_set="reply",
        edges=(("yes", leaf(0, 2)), ("no", leaf(0, 0))),
    )
    root = GameNode(
        owner=Player.LENDER,
        info_set="start",
        edges=(("in", inner), ("out", leaf(1, 1))),
    )
    tree = GameTree(root)
    bad = {"start": "in", "reply": "no"}
    verdict = is_spe(tree, bad)
    assert not verdict.is_spe
    deviations = {(w.player, w.info_set, w.deviation, w.gain) for w in verdict.witnesses}
    # the borrower's off-path choice is wrong in its own subgame, and the
    # lender's entry is wrong given that reply
    assert (Player.BORROWER, "reply", "yes", F(2)) in deviations
    assert (Player.LENDER, "start", "out", F(1)) in deviations


def test_is_spe_requires_complete_profile():
    node = GameNode(owner=Player.LENDER, info_set="root", edges=(("a", leaf(0, 0)),))
    with pytest.raises(MalformedGame):
        is_spe(GameTree(node), {})


def test_multi_member_info_set_outside_block_rejected():
    twin_a = GameNode(owner=Player.LENDER, info_set="twins", edges=(("x", leaf(0, 0)),))
    twin_b = GameNode(owner=Player.LENDER, info_set="twins", edges=(("x", leaf(1, 1)),))
    root = GameNode(owner=Player.LENDER, info_set="root", edges=(("a", twin_a), ("b", twin_b)))
    with pytest.raises(MalformedGame):
        solve_spe(GameTree(root))


def test_info_set_must_share_owner():
    a = GameNode(owner=Player.LENDER, info_set="mixed", edges=(("x", leaf(0, 0)),))
    b = GameNode(owner=Player.BORROWER, info_set="mixed", edges=(("x", leaf(1, 1)),))
    root = GameNode(owner=Player.LENDER, info_set="root", edges=(("a", a), ("b", b)))
    with pytest.raises(MalformedGame):
        GameTree(root)


def test_info_set_must_share_action_labels():
    a = GameNode(owner=Player.LENDER, info_set="twins", edges=(("x", leaf(0, 0)),))
    b = GameNode(owner=Player.LENDER, info_set="twins", edges=(("y", leaf(1, 1)),))
    root = GameNode(owner=Player.BORROWER, info_set="root", edges=(("a", a), ("b", b)))
    with pytest.raises(MalformedGame):
        GameTree(root)


def test_verdict_serializes_with_exact_rationals():
    inner = GameNode(
        owner=Player.BORROWER,
        info_set="reply",
        edges=(("yes", leaf(0, F(1, 5))), ("no", leaf(0, 0))),
    )
    tree = GameTree(inner)
    verdict = is_spe(tree, {"reply": "no"})
    data = verdict.to_dict()
    assert data["is_spe"] is False
    assert data["witnesses"][0]["gain"] == "1/5"
    assert data["witnesses"][0]["deviation"] == "yes"


def test_one_shot_checker_matches_brute_force_on_solved_profiles():
    # cooperation (up, left) is undermined by both unilateral temptations
    payoffs = {
        ("up", "left"): (2, 2),
        ("up", "right"): (3, 0),
        ("down", "left"): (0, 3),
        ("down", "right"): (1, 1),
    }
    block = simultaneous_block(payoffs)
    root = GameNode(owner=Player.BORROWER, info_set="enter", edges=(("play", block), ("quit", leaf(0, 0))))
    tree = GameTree(root)
    for _, _, profile in solve_spe(tree):
        assert is_spe(tree, profile).is_spe
        assert brute_force_is_spe(tree, profile)
    # and a deliberately wrong profile is rejected by both
    bad = {"enter": "play", "block.borrower": "up", "block.lender": "left"}
    assert not is_spe(tree, bad).is_spe
    assert not brute_force_is_spe(tree, bad)
