"""Extensive-form game trees with information sets and pure strategy profiles.

Trees are immutable after construction.  Decision nodes belong to
information sets; a node that is the sole member of its information set roots
a subgame.  Simultaneous moves appear as two-level blocks: an upper decision
node whose children all belong to one (multi-member) information set of the
other player.
"""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from fractions import Fraction
from typing import Iterator, Optional

from ..core import LoanLabError, rat_str
from ..protocols import Outcome, Trace


class Player(Enum):
    LENDER = "L"
    BORROWER = "B"
    NATURE = "N"


class MalformedGame(LoanLabError):
    pass


@dataclass(frozen=True)
class Leaf:
    """Terminal node: (lender, borrower) utilities in fiat-M plus the outcome
    and, when built from a protocol, the originating event trace."""

    utilities: tuple[Fraction, Fraction]
    outcome: Optional[Outcome] = None
    trace: Optional[Trace] = None
    label: str = ""

    @property
    def lender(self) -> Fraction:
        return self.utilities[0]

    @property
    def borrower(self) -> Fraction:
        return self.utilities[1]


@dataclass(eq=False)
class GameNode:
    """Decision or chance node.  ``edges`` maps action labels to children in
    a fixed order; Nature nodes carry exact probabilities summing to one.
    Nodes compare by identity: a tree has one object per vertex."""

    owner: Player
    info_set: str
    edges: tuple[tuple[str, "GameNode | Leaf"], ...]
    probs: Optional[tuple[Fraction, ...]] = None  # Nature only
    node_id: int = -1

    def actions(self) -> tuple[str, ...]:
        return tuple(label for label, _ in self.edges)

    def child(self, action: str) -> "GameNode | Leaf":
        for label, node in self.edges:
            if label == action:
                return node
        raise MalformedGame(f"no action {action!r} at node {self.node_id} ({self.info_set})")


class GameTree:
    """Validated game tree with an information-set registry."""

    def __init__(self, root: GameNode | Leaf, name: str = "game"):
        self.root = root
        self.name = name
        self.info_sets: dict[str, list[GameNode]] = {}
        self._index(root)
        self._validate()

    def _index(self, node: GameNode | Leaf) -> None:
        counter = [0]

        def visit(n: GameNode | Leaf) -> None:
            if isinstance(n, Leaf):
                return
            n.node_id = counter[0]
            counter[0] += 1
            if n.owner is not Player.NATURE:
                self.info_sets.setdefault(n.info_set, []).append(n)
            for _, child in n.edges:
                visit(child)

        visit(node)

    def _validate(self) -> None:
        for name, members in self.info_sets.items():
            owners = {m.owner for m in members}
            if len(owners) != 1:
                raise MalformedGame(f"info set {name!r} mixes owners")
            actions = {m.actions() for m in members}
            if len(actions) != 1:
                raise MalformedGame(f"info set {name!r} mixes action sets")
        for node in self.decision_nodes():
            if node.owner is Player.NATURE:
                if node.probs is None or len(node.probs) != len(node.edges):
                    raise MalformedGame("Nature node without matching probabilities")
                if sum(node.probs) != 1:
                    raise MalformedGame("Nature edge weights must sum to 1")
            if node.owner is not Player.NATURE and node.probs is not None:
                raise MalformedGame("only Nature nodes carry probabilities")

    def decision_nodes(self) -> Iterator[GameNode]:
        def visit(n: GameNode | Leaf) -> Iterator[GameNode]:
            if isinstance(n, Leaf):
                return
            yield n
            for _, child in n.edges:
                yield from visit(child)

        return visit(self.root)

    def leaves(self) -> Iterator[Leaf]:
        def visit(n: GameNode | Leaf) -> Iterator[Leaf]:
            if isinstance(n, Leaf):
                yield n
                return
            for _, child in n.edges:
                yield from visit(child)

        return visit(self.root)

    def subgame_roots(self) -> Iterator[GameNode]:
        """Nodes that are the sole member of their information set (Nature
        nodes always root subgames)."""
        for node in self.decision_nodes():
            if node.owner is Player.NATURE or len(self.info_sets[node.info_set]) == 1:
                yield node

    def is_simultaneous_block(self, node: GameNode) -> bool:
        """True when ``node`` heads a two-level simultaneous block: every
        child is a decision node of the other player and all children share
        one multi-member information set."""
        if isinstance(node, Leaf) or node.owner is Player.NATURE:
            return False
        children = [child for _, child in node.edges]
        if not children or not all(isinstance(c, GameNode) for c in children):
            return False
        kids = [c for c in children if isinstance(c, GameNode)]
        info = {c.info_set for c in kids}
        if len(info) != 1:
            return False
        shared = info.pop()
        members = self.info_sets.get(shared, [])
        return len(members) > 1 and set(members) == set(kids) and all(
            c.owner is not node.owner and c.owner is not Player.NATURE for c in kids
        )


StrategyProfile = dict[str, str]  # info-set name -> action label


def validate_profile(tree: GameTree, profile: StrategyProfile) -> None:
    """Every decision info set must be mapped to one of its actions."""
    for name, members in tree.info_sets.items():
        if name not in profile:
            raise MalformedGame(f"profile misses info set {name!r}")
        if profile[name] not in members[0].actions():
            raise MalformedGame(
                f"profile plays {profile[name]!r} at {name!r}, not in {members[0].actions()}"
            )


def expected_utilities(
    node: GameNode | Leaf, profile: StrategyProfile
) -> tuple[Fraction, Fraction]:
    """Utilities reached from ``node`` under ``profile``, in expectation over
    Nature."""
    if isinstance(node, Leaf):
        return node.utilities
    if node.owner is Player.NATURE:
        lender = Fraction(0)
        borrower = Fraction(0)
        assert node.probs is not None
        for (label, child), p in zip(node.edges, node.probs):
            if p == 0:
                continue
            ul, ub = expected_utilities(child, profile)
            lender += p * ul
            borrower += p * ub
        return lender, borrower
    action = profile.get(node.info_set)
    if action is None:
        raise MalformedGame(f"profile misses info set {node.info_set!r}")
    return expected_utilities(node.child(action), profile)


def format_utilities(utilities: tuple[Fraction, Fraction]) -> str:
    return f"({rat_str(utilities[0])}, {rat_str(utilities[1])})"
