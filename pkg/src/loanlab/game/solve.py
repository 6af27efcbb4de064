"""Pure-strategy subgame-perfect-equilibrium solving and verification.

``solve_spe`` enumerates every pure SPE by backward induction, carrying all
maximizer ties upward.  Simultaneous two-level blocks are solved as one unit
through their induced normal form; a block with no pure Nash equilibrium is
reported, never guessed.

``is_spe`` checks a given profile with one-shot deviations at every subgame
(sound for finite trees with perfect recall; the test suite cross-checks it
against brute-force strategy enumeration).
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from itertools import product
from typing import Iterable

from ..core import LoanLabError, rat_str
from .tree import (
    GameNode,
    GameTree,
    Leaf,
    MalformedGame,
    Player,
    StrategyProfile,
    expected_utilities,
    validate_profile,
)


class NoPureEquilibrium(LoanLabError):
    pass


class EnumerationOverflow(LoanLabError):
    pass


_PLAYER_INDEX = {Player.LENDER: 0, Player.BORROWER: 1}


@dataclass(frozen=True)
class SpeWitness:
    """A profitable unilateral deviation found in some subgame."""

    subgame_node: int
    subgame_info_set: str
    player: Player
    info_set: str
    prescribed: str
    deviation: str
    gain: Fraction

    def describe(self) -> str:
        return (
            f"subgame@{self.subgame_info_set}: {self.player.name.lower()} gains "
            f"{rat_str(self.gain)} by playing {self.deviation!r} instead of "
            f"{self.prescribed!r} at {self.info_set}"
        )


@dataclass(frozen=True)
class SpeVerdict:
    is_spe: bool
    witnesses: tuple[SpeWitness, ...]

    def to_dict(self) -> dict:
        return {
            "is_spe": self.is_spe,
            "witnesses": [
                {
                    "subgame": w.subgame_info_set,
                    "player": w.player.name.lower(),
                    "info_set": w.info_set,
                    "prescribed": w.prescribed,
                    "deviation": w.deviation,
                    "gain": rat_str(w.gain),
                }
                for w in self.witnesses
            ],
        }


Solution = tuple[Fraction, Fraction, StrategyProfile]


def solve_spe(tree: GameTree, cap: int = 4096) -> list[Solution]:
    """All pure-strategy SPE of ``tree`` as (lender value, borrower value,
    profile) triples, deterministic order."""
    solutions = _solve(tree, tree.root, cap)
    if not solutions:
        raise NoPureEquilibrium(f"{tree.name}: no pure-strategy SPE")
    return solutions


def _merge(*fragments: StrategyProfile) -> StrategyProfile:
    merged: StrategyProfile = {}
    for frag in fragments:
        for key, value in frag.items():
            if merged.get(key, value) != value:
                raise MalformedGame(f"conflicting prescriptions for info set {key!r}")
            merged[key] = value
    return merged


def _dedupe(solutions: Iterable[Solution], cap: int) -> list[Solution]:
    seen = set()
    out: list[Solution] = []
    for ul, ub, frag in solutions:
        key = (ul, ub, tuple(sorted(frag.items())))
        if key not in seen:
            seen.add(key)
            out.append((ul, ub, frag))
        if len(out) > cap:
            raise EnumerationOverflow(f"more than {cap} tied equilibria")
    return out


def _solve(tree: GameTree, node: GameNode | Leaf, cap: int) -> list[Solution]:
    if isinstance(node, Leaf):
        return [(node.lender, node.borrower, {})]
    if node.owner is Player.NATURE:
        child_solutions = [_solve(tree, child, cap) for _, child in node.edges]
        assert node.probs is not None
        results: list[Solution] = []
        for combo in product(*child_solutions):
            ul = sum((p * s[0] for p, s in zip(node.probs, combo)), Fraction(0))
            ub = sum((p * s[1] for p, s in zip(node.probs, combo)), Fraction(0))
            results.append((ul, ub, _merge(*(s[2] for s in combo))))
        return _dedupe(results, cap)
    if tree.is_simultaneous_block(node):
        return _solve_block(tree, node, cap)

    if len(tree.info_sets[node.info_set]) != 1:
        raise MalformedGame(
            f"info set {node.info_set!r} spans nodes outside a simultaneous block"
        )
    idx = _PLAYER_INDEX[node.owner]
    child_solutions = [_solve(tree, child, cap) for _, child in node.edges]
    results = []
    for combo in product(*child_solutions):
        best = max(s[idx] for s in combo)
        for (label, _), sol in zip(node.edges, combo):
            if sol[idx] == best:
                frag = _merge(*(s[2] for s in combo), {node.info_set: label})
                results.append((sol[0], sol[1], frag))
    return _dedupe(results, cap)


def _solve_block(tree: GameTree, node: GameNode, cap: int) -> list[Solution]:
    """Solve a two-level simultaneous block via its induced normal form.

    The upper node's owner picks a row, the shared-info-set owner picks a
    column; continuation values come from the grandchildren's own SPE
    solutions.  All pure Nash equilibria are returned.
    """
    upper_idx = _PLAYER_INDEX[node.owner]
    rows = node.actions()
    members = {label: node.child(label) for label in rows}
    first = members[rows[0]]
    assert isinstance(first, GameNode)
    lower_idx = _PLAYER_INDEX[first.owner]
    cols = first.actions()
    shared_info = first.info_set

    cells = [(row, col) for row in rows for col in cols]
    cell_solutions = []
    for row, col in cells:
        member = members[row]
        assert isinstance(member, GameNode)
        cell_solutions.append(_solve(tree, member.child(col), cap))

    results: list[Solution] = []
    found_selection = False
    for combo in product(*cell_solutions):
        found_selection = True
        payoff = {cell: sol for cell, sol in zip(cells, combo)}
        for row, col in cells:
            here = payoff[(row, col)]
            if any(payoff[(r, col)][upper_idx] > here[upper_idx] for r in rows):
                continue
            if any(payoff[(row, c)][lower_idx] > here[lower_idx] for c in cols):
                continue
            frag = _merge(
                *(s[2] for s in combo),
                {node.info_set: row, shared_info: col},
            )
            results.append((here[0], here[1], frag))
    if found_selection and not results:
        raise NoPureEquilibrium(
            f"{tree.name}: simultaneous block at {node.info_set!r} has no pure Nash equilibrium"
        )
    return _dedupe(results, cap)


# ---------------------------------------------------------------------------
# Profile verification
# ---------------------------------------------------------------------------


def is_spe(tree: GameTree, profile: StrategyProfile) -> SpeVerdict:
    """Check ``profile`` for subgame perfection.

    Every subgame (a node alone in its information set, plus chance nodes) is
    examined for a profitable one-shot unilateral deviation, in expectation
    over Nature; each violation yields a first-class witness.
    """
    validate_profile(tree, profile)
    witnesses: list[SpeWitness] = []
    for root in tree.subgame_roots():
        reachable = _info_sets_below(tree, root)
        base = expected_utilities(root, profile)
        for player in (Player.LENDER, Player.BORROWER):
            idx = _PLAYER_INDEX[player]
            for info_name in sorted(reachable):
                members = tree.info_sets[info_name]
                if members[0].owner is not player:
                    continue
                prescribed = profile[info_name]
                for action in members[0].actions():
                    if action == prescribed:
                        continue
                    trial = dict(profile)
                    trial[info_name] = action
                    value = expected_utilities(root, trial)[idx]
                    gain = value - base[idx]
                    if gain > 0:
                        witnesses.append(
                            SpeWitness(
                                subgame_node=root.node_id,
                                subgame_info_set=root.info_set,
                                player=player,
                                info_set=info_name,
                                prescribed=prescribed,
                                deviation=action,
                                gain=gain,
                            )
                        )
    witnesses.sort(key=lambda w: (w.subgame_node, w.player.value, w.info_set, w.deviation))
    return SpeVerdict(is_spe=not witnesses, witnesses=tuple(witnesses))


def _info_sets_below(tree: GameTree, node: GameNode | Leaf) -> set[str]:
    out: set[str] = set()

    def visit(n: GameNode | Leaf) -> None:
        if isinstance(n, Leaf):
            return
        if n.owner is not Player.NATURE:
            out.add(n.info_set)
        for _, child in n.edges:
            visit(child)

    visit(node)
    return out
