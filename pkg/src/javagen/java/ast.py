from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, field
from typing import Iterator, List, Optional


@dataclass(eq=False)
class AstNode:
    """A parse-tree node.

    Leaves carry ``leaf_text`` (and the index of the token they came from);
    internal nodes carry ``children``. ``synthetic`` marks nodes introduced by
    the member-function wrapper rather than by the input text.
    """

    kind: str
    children: List["AstNode"] = field(default_factory=list)
    leaf_text: str = ""
    token_index: int = -1
    synthetic: bool = False

    @property
    def is_leaf(self) -> bool:
        return not self.children

    def walk(self) -> Iterator["AstNode"]:
        stack = [self]
        while stack:
            node = stack.pop()
            yield node
            stack.extend(reversed(node.children))

    def leaves(self, include_synthetic: bool = False) -> List["AstNode"]:
        return [
            n for n in self.walk()
            if n.is_leaf and (include_synthetic or not n.synthetic)
        ]

    def top_level(self) -> List["AstNode"]:
        """Outermost non-synthetic nodes (the user's code under any wrapper)."""
        if not self.synthetic:
            return [self]
        out: List[AstNode] = []
        for child in self.children:
            if not child.is_leaf:
                out.extend(child.top_level())
        return out

    def signature(self) -> str:
        """Canonical parenthesized pre-order serialization of this subtree."""
        if self.is_leaf:
            return _leaf_repr(self.leaf_text)
        parts = [self.kind] + [c.signature() for c in self.children]
        return "(" + " ".join(parts) + ")"

    def structurally_equal(self, other: "AstNode") -> bool:
        return (
            self.kind == other.kind
            and self.leaf_text == other.leaf_text
            and self.synthetic == other.synthetic
            and len(self.children) == len(other.children)
            and all(a.structurally_equal(b) for a, b in zip(self.children, other.children))
        )

    def pretty(self, indent: int = 0) -> str:
        pad = "  " * indent
        if self.is_leaf:
            return f"{pad}{self.kind} {self.leaf_text!r}"
        mark = " [synthetic]" if self.synthetic else ""
        lines = [f"{pad}{self.kind}{mark}"]
        lines.extend(c.pretty(indent + 1) for c in self.children)
        return "\n".join(lines)


def _leaf_repr(text: str) -> str:
    if not text or any(ch.isspace() or ch in '()"\\' for ch in text):
        return json.dumps(text)
    return text


def enumerate_subtrees(ast: Optional[AstNode]) -> Counter:
    """Multiset of subtree signatures, one per internal non-synthetic node."""
    out: Counter = Counter()
    if ast is None:
        return out
    for node in ast.walk():
        if node.is_leaf or node.synthetic:
            continue
        out[node.signature()] += 1
    return out
