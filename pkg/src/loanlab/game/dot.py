"""Deterministic Graphviz export of game trees."""

from __future__ import annotations

from typing import Optional

from ..core import rat_str
from .tree import GameNode, GameTree, Leaf, Player, StrategyProfile

_SHAPES = {Player.LENDER: "box", Player.BORROWER: "ellipse", Player.NATURE: "diamond"}


def export_dot(tree: GameTree, profile: Optional[StrategyProfile] = None) -> str:
    """Render the tree as DOT text: owners, action labels, leaf utilities,
    and shared information sets (dashed borders).  When a profile is given,
    its chosen edges are drawn bold.  Output is byte-stable."""
    lines = [f'digraph "{tree.name}" {{', "  rankdir=TB;"]
    leaf_counter = [0]

    def leaf_id() -> str:
        leaf_counter[0] += 1
        return f"leaf{leaf_counter[0]}"

    def emit(node: GameNode | Leaf) -> str:
        if isinstance(node, Leaf):
            ident = leaf_id()
            utility = f"({rat_str(node.lender)}, {rat_str(node.borrower)})"
            tag = node.outcome.value if node.outcome else ""
            label = f"{utility}\\n{tag}" if tag else utility
            lines.append(f'  {ident} [shape=plaintext, label="{label}"];')
            return ident
        ident = f"n{node.node_id}"
        shared = (
            node.owner is not Player.NATURE
            and len(tree.info_sets.get(node.info_set, [])) > 1
        )
        style = ', style="dashed"' if shared else ""
        lines.append(
            f'  {ident} [shape={_SHAPES[node.owner]}, '
            f'label="{node.owner.value}: {node.info_set}"{style}];'
        )
        chosen = profile.get(node.info_set) if profile else None
        for label, child in node.edges:
            child_id = emit(child)
            attrs = [f'label="{label}"']
            if chosen is not None and label == chosen:
                attrs.append("penwidth=2")
                attrs.append("style=bold")
            lines.append(f"  {ident} -> {child_id} [{', '.join(attrs)}];")
        return ident

    emit(tree.root)
    lines.append("}")
    return "\n".join(lines) + "\n"
