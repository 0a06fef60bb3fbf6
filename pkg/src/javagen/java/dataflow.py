"""Single-pass, flow-insensitive def-use extraction over the Java AST.

Two relations are produced:

* ``computed_from`` -- every variable read on the right-hand side of an
  assignment or initializer feeds the assigned variable;
* ``comes_from`` -- any other read of a variable that already has a textual
  definition earlier in the snippet.

Field accesses, method names and side effects of calls are ignored. Variable
names are alpha-renamed ``v0, v1, ...`` by first appearance in the token
stream so the result does not depend on identifier spelling.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

from javagen.java.ast import AstNode
from javagen.java.lexer import IDENTIFIER

COMES_FROM = "comes_from"
COMPUTED_FROM = "computed_from"

_SKIP = frozenset(
    {
        "type",
        "type_arguments",
        "type_parameters",
        "class_body",
        "annotation",
        "modifiers",
        "dimensions",
        "throws",
        "superclass",
        "super_interfaces",
        "extends_interfaces",
    }
)
# statements whose bare identifier children are expressions
_EXPR_PARENTS = frozenset(
    {
        "return_statement",
        "throw_statement",
        "expression_statement",
        "switch_label",
        "assert_statement",
        "for_statement",
        "resource_specification",
    }
)


@dataclass(frozen=True, order=True)
class FlowEdge:
    use_var: str
    def_var: str
    relation: str

    def __str__(self) -> str:
        return f"({self.use_var} {self.relation} {self.def_var})"


def _is_ident(node: AstNode) -> bool:
    return node.is_leaf and node.kind == IDENTIFIER


def _is_update(node: AstNode) -> bool:
    if node.kind == "assignment_expression":
        return True
    if node.kind in ("unary_expression", "postfix_expression"):
        return any(c.is_leaf and c.leaf_text in ("++", "--") for c in node.children)
    return False


class _Extractor:
    def __init__(self) -> None:
        self.raw_edges: List[Tuple[str, str, str]] = []
        self.first_seen: Dict[str, int] = {}
        self.defined: set = set()

    def _see(self, leaf: AstNode) -> str:
        name = leaf.leaf_text
        idx = leaf.token_index
        if name not in self.first_seen or idx < self.first_seen[name]:
            self.first_seen[name] = idx
        return name

    def define(self, leaf: AstNode) -> None:
        self.defined.add(self._see(leaf))

    def plain_use(self, leaf: AstNode) -> None:
        name = self._see(leaf)
        if name in self.defined:
            self.raw_edges.append((name, name, COMES_FROM))

    def computed(self, target: AstNode, sources: List[AstNode]) -> None:
        tname = self._see(target)
        for src in sources:
            self.raw_edges.append((tname, self._see(src), COMPUTED_FROM))

    # ------------------------------------------------------------ statements
    def visit(self, node: AstNode) -> None:
        if node.is_leaf:
            return
        kind = node.kind
        if kind in _SKIP and kind != "class_body":
            return
        if kind == "variable_declarator":
            self._declarator(node)
            return
        if kind in ("formal_parameter", "catch_parameter"):
            names = [c for c in node.children if _is_ident(c)]
            if names:
                self.define(names[-1])
            return
        if kind == "resource":
            name = next(c for c in node.children if _is_ident(c))
            self.computed(name, self.uses(node.children[-1]))
            self.define(name)
            return
        if kind == "enhanced_for_statement":
            name_idx = next(i for i, c in enumerate(node.children) if c.is_leaf and c.leaf_text == ":") - 1
            name = node.children[name_idx]
            iterable = node.children[name_idx + 2]
            self.computed(name, self.uses(iterable))
            self.define(name)
            self.visit(node.children[-1])
            return
        if kind in _EXPRESSION_KINDS:
            produced = self.uses(node)
            # a statement-level assignment or increment discards its value
            if not _is_update(node):
                for leaf in produced:
                    self.plain_use(leaf)
            return
        expr_parent = kind in _EXPR_PARENTS
        for child in node.children:
            if child.is_leaf:
                if expr_parent and _is_ident(child):
                    self.plain_use(child)
                continue
            self.visit(child)

    def _declarator(self, node: AstNode) -> None:
        name = node.children[0]
        init = None
        for i, c in enumerate(node.children):
            if c.is_leaf and c.leaf_text == "=" and i + 1 < len(node.children):
                init = node.children[i + 1]
        if init is not None:
            self.computed(name, self.uses(init))
        self.define(name)

    # ----------------------------------------------------------- expressions
    def uses(self, node: AstNode) -> List[AstNode]:
        """Identifier leaves whose values flow out of ``node``.

        Side effects inside the expression (nested assignments, increments)
        are recorded as edges along the way.
        """
        if node.is_leaf:
            return [node] if _is_ident(node) else []
        kind = node.kind
        if kind in _SKIP or kind in ("literal", "class_literal"):
            return []
        ch = node.children
        if kind == "assignment_expression":
            return self._assignment(ch[0], ch[1].leaf_text, ch[2])
        if kind in ("unary_expression", "postfix_expression"):
            op, operand = (ch[0], ch[1]) if kind == "unary_expression" else (ch[1], ch[0])
            if op.leaf_text in ("++", "--"):
                target = self._target(operand)
                if target is not None:
                    self.computed(target, [target])
                    self.define(target)
                    return [target]
            return self.uses(operand)
        if kind == "lambda_expression":
            params = ch[0]
            if _is_ident(params):
                self.define(params)
            else:
                for p in params.children:
                    if _is_ident(p):
                        self.define(p)
                    elif not p.is_leaf:
                        self.visit(p)
            body = ch[-1]
            if body.kind == "block":
                self.visit(body)
            else:
                for leaf in self.uses(body):
                    self.plain_use(leaf)
            return []
        if kind == "instanceof_expression":
            out = self.uses(ch[0])
            if _is_ident(ch[-1]):
                self.define(ch[-1])
            return out
        if kind in ("field_access", "method_reference"):
            return self.uses(ch[0])
        out: List[AstNode] = []
        for i, child in enumerate(ch):
            if kind == "method_invocation" and i + 1 < len(ch) and ch[i + 1].kind == "argument_list":
                # the method name
                continue
            out.extend(self.uses(child))
        return out

    def _target(self, lhs: AstNode) -> Optional[AstNode]:
        if _is_ident(lhs):
            return lhs
        if lhs.kind == "array_access":
            return self._target(lhs.children[0])
        if lhs.kind == "parenthesized_expression":
            return self._target(lhs.children[1])
        return None

    def _assignment(self, lhs: AstNode, op: str, rhs: AstNode) -> List[AstNode]:
        # visit the left side first so names are seen in token order
        target = self._target(lhs)
        if target is None:
            for leaf in self.uses(lhs):
                self.plain_use(leaf)
        elif lhs is not target:
            # array index expressions are plain reads
            node = lhs
            while node.kind in ("array_access", "parenthesized_expression"):
                if node.kind == "array_access":
                    for leaf in self.uses(node.children[2]):
                        self.plain_use(leaf)
                node = node.children[0] if node.kind == "array_access" else node.children[1]
        if target is not None:
            self._see(target)
        sources = self.uses(rhs)
        if target is None:
            for leaf in sources:
                self.plain_use(leaf)
            return []
        if op != "=":
            sources = [target] + sources
        self.computed(target, sources)
        self.define(target)
        return [target]


_EXPRESSION_KINDS = frozenset(
    {
        "assignment_expression",
        "binary_expression",
        "unary_expression",
        "postfix_expression",
        "ternary_expression",
        "cast_expression",
        "instanceof_expression",
        "parenthesized_expression",
        "method_invocation",
        "field_access",
        "array_access",
        "object_creation_expression",
        "array_creation_expression",
        "array_initializer",
        "lambda_expression",
        "method_reference",
        "class_literal",
        "literal",
        "explicit_constructor_invocation",
    }
)


def extract_dataflow(ast: Optional[AstNode]) -> Counter:
    """Multiset of normalized :class:`FlowEdge` for the given tree."""
    if ast is None:
        return Counter()
    ex = _Extractor()
    ex.visit(ast)
    order = sorted(ex.first_seen, key=lambda n: (ex.first_seen[n], n))
    rename = {name: f"v{i}" for i, name in enumerate(order)}
    return Counter(FlowEdge(rename[u], rename[d], rel) for u, d, rel in ex.raw_edges)
