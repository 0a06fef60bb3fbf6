"""Recursive-descent parser for the subset of Java found in member functions.

Covers class/interface/enum declarations, fields, methods and constructors,
the usual statements (block, local declaration, if, for, for-each, while,
do, try/catch/finally, switch, return, throw, break, continue,
synchronized, assert, labels) and a precedence-climbing expression grammar
with casts, lambdas, method references, generics and array/object creation.
Anything else is rejected with :class:`JavaSyntaxError`.
"""

from __future__ import annotations

from typing import FrozenSet, Iterable, List, Optional, Sequence

from javagen.java.ast import AstNode
from javagen.java.lexer import (
    IDENTIFIER,
    KEYWORD,
    LITERAL,
    OPERATOR,
    SEPARATOR,
    Token,
    lex,
)

PRIMITIVES = frozenset("boolean byte char short int long float double".split())
MODIFIERS = frozenset(
    "public protected private static abstract final native synchronized "
    "transient volatile strictfp default".split()
)
ASSIGN_OPS = frozenset("= += -= *= /= &= |= ^= %= <<= >>= >>>=".split())
BINARY_PRECEDENCE = {
    "||": 1,
    "&&": 2,
    "|": 3,
    "^": 4,
    "&": 5,
    "==": 6,
    "!=": 6,
    "<": 7,
    ">": 7,
    "<=": 7,
    ">=": 7,
    "instanceof": 7,
    "<<": 8,
    ">>": 8,
    ">>>": 8,
    "+": 9,
    "-": 9,
    "*": 10,
    "/": 10,
    "%": 10,
}
PREFIX_OPS = frozenset("+ - ++ -- ! ~".split())

WRAP_CLASS = "_W"
WRAP_METHOD = "_m"


class JavaSyntaxError(ValueError):
    """Input is not in the supported Java subset."""

    def __init__(self, offset: int, expected: Iterable[str], found: str = ""):
        self.offset = offset
        self.expected = frozenset(expected)
        self.found = found
        exp = ", ".join(sorted(self.expected)) or "?"
        super().__init__(f"syntax error at offset {offset}: expected {exp}, found {found!r}")


class _Backtrack(Exception):
    pass


class Parser:
    def __init__(self, tokens: Sequence[Token], eof_offset: int):
        self.toks = list(tokens)
        self.pos = 0
        self.eof_offset = eof_offset
        # pending '>' pieces from splitting '>>' / '>>>' inside type arguments
        self._pending_gt = 0
        self._speculating = 0

    # ------------------------------------------------------------------ helpers
    def peek(self, k: int = 0) -> Optional[Token]:
        i = self.pos + k
        return self.toks[i] if i < len(self.toks) else None

    def at(self, text: str, k: int = 0) -> bool:
        tok = self.peek(k)
        if tok is None:
            return False
        if k == 0 and self._pending_gt:
            return text == ">"
        return tok.text == text and tok.kind != LITERAL

    def at_kind(self, kind: str, k: int = 0) -> bool:
        tok = self.peek(k)
        return tok is not None and tok.kind == kind and not (k == 0 and self._pending_gt)

    def at_ident(self, k: int = 0) -> bool:
        return self.at_kind(IDENTIFIER, k)

    def error(self, expected: Iterable[str]) -> JavaSyntaxError:
        tok = self.peek()
        if self._speculating:
            raise _Backtrack()
        if tok is None:
            return JavaSyntaxError(self.eof_offset, expected, "<eof>")
        return JavaSyntaxError(tok.start, expected, tok.text)

    def leaf(self) -> AstNode:
        tok = self.toks[self.pos]
        node = AstNode(tok.kind, leaf_text=tok.text, token_index=self.pos, synthetic=tok.synthetic)
        self.pos += 1
        return node

    def expect(self, text: str) -> AstNode:
        if text == ">" and self._close_angle():
            return self._gt_leaf()
        if not self.at(text):
            raise self.error([text])
        return self.leaf()

    def expect_ident(self) -> AstNode:
        if not self.at_ident():
            raise self.error(["<identifier>"])
        return self.leaf()

    def accept(self, text: str) -> Optional[AstNode]:
        if self.at(text):
            return self.leaf()
        return None

    def _close_angle(self) -> bool:
        if self._pending_gt:
            return True
        tok = self.peek()
        return tok is not None and tok.text in (">>", ">>>")

    def _gt_leaf(self) -> AstNode:
        # '>>' closing nested type arguments is emitted as several '>' leaves
        # that all point at the same source token
        tok = self.toks[self.pos]
        if not self._pending_gt:
            self._pending_gt = len(tok.text)
        self._pending_gt -= 1
        node = AstNode(OPERATOR, leaf_text=">", token_index=self.pos, synthetic=tok.synthetic)
        if self._pending_gt == 0:
            self.pos += 1
        return node

    def speculate(self, fn):
        """Run ``fn``; on failure restore position and return None."""
        saved = (self.pos, self._pending_gt)
        self._speculating += 1
        try:
            return fn()
        except (_Backtrack, JavaSyntaxError):
            self.pos, self._pending_gt = saved
            return None
        finally:
            self._speculating -= 1

    # ----------------------------------------------------------- compilation
    def compilation_unit(self) -> AstNode:
        children: List[AstNode] = []
        if self.at("package"):
            children.append(self._node("package_declaration", [self.leaf(), self.qualified_name(), self.expect(";")]))
        while self.at("import"):
            parts = [self.leaf()]
            if self.at("static"):
                parts.append(self.leaf())
            parts.append(self.qualified_name(allow_star=True))
            parts.append(self.expect(";"))
            children.append(self._node("import_declaration", parts))
        while self.peek() is not None:
            if self.at(";"):
                children.append(self.leaf())
                continue
            children.append(self.type_declaration())
        if not children:
            raise self.error(["class", "interface", "enum"])
        return self._node("compilation_unit", children)

    def qualified_name(self, allow_star: bool = False) -> AstNode:
        parts = [self.expect_ident()]
        while self.at("."):
            parts.append(self.leaf())
            if allow_star and self.at("*"):
                parts.append(self.leaf())
                break
            parts.append(self.expect_ident())
        return self._node("qualified_name", parts)

    def type_declaration(self, mods: Optional[AstNode] = None) -> AstNode:
        if mods is None:
            mods = self.modifiers()
        if self.at("class"):
            return self.class_declaration(mods)
        if self.at("interface"):
            return self.interface_declaration(mods)
        if self.at("enum"):
            return self.enum_declaration(mods)
        raise self.error(["class", "interface", "enum"])

    def _node(self, kind: str, children: Sequence[Optional[AstNode]]) -> AstNode:
        return AstNode(kind, [c for c in children if c is not None])

    def modifiers(self) -> Optional[AstNode]:
        parts: List[AstNode] = []
        while True:
            if self.at("@") and not self.at("interface", 1):
                parts.append(self.annotation())
            elif self.at_kind(KEYWORD) and self.peek().text in MODIFIERS:
                # 'default' starts a switch label inside switch bodies; callers
                # never reach here in that context
                parts.append(self.leaf())
            else:
                break
        return self._node("modifiers", parts) if parts else None

    def annotation(self) -> AstNode:
        parts = [self.expect("@"), self.qualified_name()]
        if self.at("("):
            args = [self.leaf()]
            if not self.at(")"):
                if self.at_ident() and self.at("=", 1):
                    args.append(self.element_value_pair())
                    while self.at(","):
                        args.append(self.leaf())
                        args.append(self.element_value_pair())
                else:
                    args.append(self.element_value())
            args.append(self.expect(")"))
            parts.append(self._node("annotation_arguments", args))
        return self._node("annotation", parts)

    def element_value_pair(self) -> AstNode:
        return self._node("element_value_pair", [self.expect_ident(), self.expect("="), self.element_value()])

    def element_value(self) -> AstNode:
        if self.at("@"):
            return self.annotation()
        if self.at("{"):
            parts = [self.leaf()]
            while not self.at("}"):
                parts.append(self.element_value())
                if not self.at("}"):
                    parts.append(self.expect(","))
            parts.append(self.expect("}"))
            return self._node("element_value_array", parts)
        return self.ternary()

    def class_declaration(self, mods: Optional[AstNode]) -> AstNode:
        parts = [mods, self.expect("class"), self.expect_ident()]
        if self.at("<"):
            parts.append(self.type_parameters())
        if self.at("extends"):
            parts.append(self._node("superclass", [self.leaf(), self.type_()]))
        if self.at("implements"):
            parts.append(self._node("super_interfaces", [self.leaf(), self.type_list()]))
        parts.append(self.class_body())
        return self._node("class_declaration", parts)

    def interface_declaration(self, mods: Optional[AstNode]) -> AstNode:
        parts = [mods, self.expect("interface"), self.expect_ident()]
        if self.at("<"):
            parts.append(self.type_parameters())
        if self.at("extends"):
            parts.append(self._node("extends_interfaces", [self.leaf(), self.type_list()]))
        parts.append(self.class_body())
        return self._node("interface_declaration", parts)

    def enum_declaration(self, mods: Optional[AstNode]) -> AstNode:
        parts = [mods, self.expect("enum"), self.expect_ident()]
        if self.at("implements"):
            parts.append(self._node("super_interfaces", [self.leaf(), self.type_list()]))
        body = [self.expect("{")]
        while self.at_ident() or self.at("@"):
            const = [self.modifiers(), self.expect_ident()]
            if self.at("("):
                const.append(self.arguments())
            if self.at("{"):
                const.append(self.class_body())
            body.append(self._node("enum_constant", const))
            if not self.at(","):
                break
            body.append(self.leaf())
        if self.at(";"):
            body.append(self.leaf())
            while not self.at("}"):
                if self.peek() is None:
                    raise self.error(["}"])
                body.append(self.class_body_declaration())
        body.append(self.expect("}"))
        parts.append(self._node("enum_body", body))
        return self._node("enum_declaration", parts)

    def type_list(self) -> AstNode:
        parts = [self.type_()]
        while self.at(","):
            parts.append(self.leaf())
            parts.append(self.type_())
        return self._node("type_list", parts)

    def class_body(self) -> AstNode:
        parts = [self.expect("{")]
        while not self.at("}"):
            if self.peek() is None:
                raise self.error(["}"])
            parts.append(self.class_body_declaration())
        parts.append(self.expect("}"))
        return self._node("class_body", parts)

    def class_body_declaration(self) -> AstNode:
        if self.at(";"):
            return self.leaf()
        if self.at("{"):
            return self._node("initializer", [self.block()])
        if self.at("static") and self.at("{", 1):
            return self._node("initializer", [self.leaf(), self.block()])
        mods = self.modifiers()
        if self.at("class") or self.at("interface") or self.at("enum"):
            return self.type_declaration(mods)
        tparams = self.type_parameters() if self.at("<") else None
        if self.at_ident() and self.at("(", 1):
            name = self.leaf()
            parts = [mods, tparams, name, self.formal_parameters()]
            if self.at("throws"):
                parts.append(self.throws_clause())
            parts.append(self.block())
            return self._node("constructor_declaration", parts)
        if self.at("void"):
            rtype = self.leaf()
        else:
            rtype = self.type_()
        name = self.expect_ident()
        if self.at("("):
            parts = [mods, tparams, rtype, name, self.formal_parameters()]
            if self.at("["):
                parts.append(self.dims())
            if self.at("throws"):
                parts.append(self.throws_clause())
            if self.at(";"):
                parts.append(self.leaf())
            else:
                parts.append(self.block())
            return self._node("method_declaration", parts)
        if tparams is not None or rtype.kind == KEYWORD and rtype.leaf_text == "void":
            raise self.error(["("])
        parts = [mods, rtype] + self.variable_declarators(name)
        parts.append(self.expect(";"))
        return self._node("field_declaration", parts)

    def throws_clause(self) -> AstNode:
        return self._node("throws", [self.leaf(), self.type_list()])

    def formal_parameters(self) -> AstNode:
        parts = [self.expect("(")]
        if not self.at(")"):
            parts.append(self.formal_parameter())
            while self.at(","):
                parts.append(self.leaf())
                parts.append(self.formal_parameter())
        parts.append(self.expect(")"))
        return self._node("formal_parameters", parts)

    def formal_parameter(self) -> AstNode:
        parts = [self.modifiers(), self.type_()]
        if self.at("..."):
            parts.append(self.leaf())
        parts.append(self.expect_ident())
        if self.at("["):
            parts.append(self.dims())
        return self._node("formal_parameter", parts)

    # ------------------------------------------------------------------ types
    def type_parameters(self) -> AstNode:
        parts = [self.expect("<"), self.type_parameter()]
        while self.at(","):
            parts.append(self.leaf())
            parts.append(self.type_parameter())
        parts.append(self.expect(">"))
        return self._node("type_parameters", parts)

    def type_parameter(self) -> AstNode:
        parts = [self.modifiers(), self.expect_ident()]
        if self.at("extends"):
            parts.append(self.leaf())
            parts.append(self.type_())
            while self.at("&"):
                parts.append(self.leaf())
                parts.append(self.type_())
        return self._node("type_parameter", parts)

    def type_(self, allow_dims: bool = True) -> AstNode:
        parts: List[Optional[AstNode]] = []
        while self.at("@"):
            parts.append(self.annotation())
        tok = self.peek()
        if tok is not None and tok.kind == KEYWORD and tok.text in PRIMITIVES and not self._pending_gt:
            parts.append(self.leaf())
        elif self.at_ident():
            parts.append(self.leaf())
            if self.at("<"):
                parts.append(self.type_arguments())
            while self.at(".") and self.at_ident(1):
                parts.append(self.leaf())
                parts.append(self.leaf())
                if self.at("<"):
                    parts.append(self.type_arguments())
        else:
            raise self.error(["<type>"])
        if allow_dims and self.at("[") and self.at("]", 1):
            parts.append(self.dims())
        return self._node("type", parts)

    def type_arguments(self) -> AstNode:
        parts = [self.expect("<")]
        if not self.at(">"):
            parts.append(self.type_argument())
            while self.at(","):
                parts.append(self.leaf())
                parts.append(self.type_argument())
        parts.append(self.expect(">"))
        return self._node("type_arguments", parts)

    def type_argument(self) -> AstNode:
        if self.at("?"):
            parts = [self.leaf()]
            if self.at("extends") or self.at("super"):
                parts.append(self.leaf())
                parts.append(self.type_())
            return self._node("wildcard", parts)
        return self.type_()

    def dims(self) -> AstNode:
        parts: List[AstNode] = []
        while self.at("[") and self.at("]", 1):
            parts.append(self.leaf())
            parts.append(self.leaf())
        return self._node("dimensions", parts)

    # ------------------------------------------------------------- statements
    def block(self) -> AstNode:
        parts = [self.expect("{")]
        while not self.at("}"):
            if self.peek() is None:
                raise self.error(["}"])
            parts.append(self.block_statement())
        parts.append(self.expect("}"))
        return self._node("block", parts)

    def block_statement(self) -> AstNode:
        if self.at("class") or self.at("interface") or self.at("enum"):
            return self.type_declaration(None)
        if self.at("final") or self.at("abstract") or (self.at("@") and not self.at("interface", 1)):
            mods = self.modifiers()
            if self.at("class") or self.at("interface") or self.at("enum"):
                return self.type_declaration(mods)
            decl = self.local_variable_declaration(mods)
            decl.children.append(self.expect(";"))
            return decl
        decl = self.try_local_declaration()
        if decl is not None:
            decl.children.append(self.expect(";"))
            return decl
        return self.statement()

    def try_local_declaration(self) -> Optional[AstNode]:
        tok = self.peek()
        if tok is None:
            return None
        if not (tok.kind == IDENTIFIER or (tok.kind == KEYWORD and tok.text in PRIMITIVES)):
            return None

        def attempt():
            typ = self.type_()
            if not self.at_ident():
                raise self.error(["<identifier>"])
            nxt = self.peek(1)
            if nxt is None or nxt.text not in ("=", ";", ",", "[", ":"):
                raise self.error(["=", ";"])
            return typ

        typ = self.speculate(attempt)
        if typ is None:
            return None
        name = self.expect_ident()
        return self._node("local_variable_declaration", [typ] + self.variable_declarators(name))

    def local_variable_declaration(self, mods: Optional[AstNode]) -> AstNode:
        typ = self.type_()
        name = self.expect_ident()
        return self._node("local_variable_declaration", [mods, typ] + self.variable_declarators(name))

    def variable_declarators(self, first_name: AstNode) -> List[AstNode]:
        out = [self.variable_declarator(first_name)]
        while self.at(","):
            out.append(self.leaf())
            out.append(self.variable_declarator(self.expect_ident()))
        return out

    def variable_declarator(self, name: AstNode) -> AstNode:
        parts = [name]
        if self.at("["):
            parts.append(self.dims())
        if self.at("="):
            parts.append(self.leaf())
            parts.append(self.variable_initializer())
        return self._node("variable_declarator", parts)

    def variable_initializer(self) -> AstNode:
        if self.at("{"):
            return self.array_initializer()
        return self.expression()

    def array_initializer(self) -> AstNode:
        parts = [self.expect("{")]
        while not self.at("}"):
            parts.append(self.variable_initializer())
            if not self.at("}"):
                parts.append(self.expect(","))
        parts.append(self.expect("}"))
        return self._node("array_initializer", parts)

    def statement(self) -> AstNode:
        tok = self.peek()
        if tok is None:
            raise self.error(["<statement>"])
        text = tok.text if tok.kind in (KEYWORD, SEPARATOR) else None
        if text == "{":
            return self.block()
        if text == ";":
            return self._node("empty_statement", [self.leaf()])
        if text == "if":
            parts = [self.leaf(), self.par_expression(), self.statement()]
            if self.at("else"):
                parts.append(self.leaf())
                parts.append(self.statement())
            return self._node("if_statement", parts)
        if text == "while":
            return self._node("while_statement", [self.leaf(), self.par_expression(), self.statement()])
        if text == "do":
            return self._node(
                "do_statement",
                [self.leaf(), self.statement(), self.expect("while"), self.par_expression(), self.expect(";")],
            )
        if text == "for":
            return self.for_statement()
        if text == "try":
            return self.try_statement()
        if text == "switch":
            return self.switch_statement()
        if text == "return":
            parts = [self.leaf()]
            if not self.at(";"):
                parts.append(self.expression())
            parts.append(self.expect(";"))
            return self._node("return_statement", parts)
        if text == "throw":
            return self._node("throw_statement", [self.leaf(), self.expression(), self.expect(";")])
        if text in ("break", "continue"):
            parts = [self.leaf()]
            if self.at_ident():
                parts.append(self.leaf())
            parts.append(self.expect(";"))
            return self._node(f"{text}_statement", parts)
        if text == "synchronized":
            return self._node("synchronized_statement", [self.leaf(), self.par_expression(), self.block()])
        if text == "assert":
            parts = [self.leaf(), self.expression()]
            if self.at(":"):
                parts.append(self.leaf())
                parts.append(self.expression())
            parts.append(self.expect(";"))
            return self._node("assert_statement", parts)
        if tok.kind == IDENTIFIER and self.at(":", 1):
            return self._node("labeled_statement", [self.leaf(), self.leaf(), self.statement()])
        if tok.kind == KEYWORD and tok.text in (
            "else", "case", "default", "catch", "finally", "goto", "const", "package", "import",
        ):
            raise self.error(["<statement>"])
        return self._node("expression_statement", [self.expression(), self.expect(";")])

    def par_expression(self) -> AstNode:
        return self._node("parenthesized_expression", [self.expect("("), self.expression(), self.expect(")")])

    def for_statement(self) -> AstNode:
        parts = [self.expect("for"), self.expect("(")]

        def enhanced():
            mods = self.modifiers()
            typ = self.type_()
            name = self.expect_ident()
            colon = self.expect(":")
            return [mods, typ, name, colon]

        head = self.speculate(enhanced)
        if head is not None:
            parts.extend(head)
            parts.append(self.expression())
            parts.append(self.expect(")"))
            parts.append(self.statement())
            return self._node("enhanced_for_statement", parts)

        if not self.at(";"):
            if self.at("final") or self.at("@"):
                parts.append(self.local_variable_declaration(self.modifiers()))
            else:
                decl = self.try_local_declaration()
                if decl is not None:
                    parts.append(decl)
                else:
                    parts.extend(self.expression_list())
        parts.append(self.expect(";"))
        if not self.at(";"):
            parts.append(self.expression())
        parts.append(self.expect(";"))
        if not self.at(")"):
            parts.extend(self.expression_list())
        parts.append(self.expect(")"))
        parts.append(self.statement())
        return self._node("for_statement", parts)

    def expression_list(self) -> List[AstNode]:
        out = [self.expression()]
        while self.at(","):
            out.append(self.leaf())
            out.append(self.expression())
        return out

    def try_statement(self) -> AstNode:
        parts = [self.expect("try")]
        if self.at("("):
            res = [self.leaf()]
            while not self.at(")"):
                if self.at_ident() and (self.at(")", 1) or self.at(";", 1)):
                    res.append(self.leaf())
                else:
                    mods = self.modifiers()
                    typ = self.type_()
                    name = self.expect_ident()
                    res.append(self._node("resource", [mods, typ, name, self.expect("="), self.expression()]))
                if self.at(";"):
                    res.append(self.leaf())
                elif not self.at(")"):
                    raise self.error([";", ")"])
            res.append(self.expect(")"))
            parts.append(self._node("resource_specification", res))
        parts.append(self.block())
        while self.at("catch"):
            clause = [self.leaf(), self.expect("(")]
            param = [self.modifiers(), self.type_()]
            while self.at("|"):
                param.append(self.leaf())
                param.append(self.type_())
            param.append(self.expect_ident())
            clause.append(self._node("catch_parameter", param))
            clause.append(self.expect(")"))
            clause.append(self.block())
            parts.append(self._node("catch_clause", clause))
        if self.at("finally"):
            parts.append(self._node("finally_clause", [self.leaf(), self.block()]))
        if len(parts) == 2 and parts[1].kind == "block":
            raise self.error(["catch", "finally"])
        return self._node("try_statement", parts)

    def switch_statement(self) -> AstNode:
        parts = [self.expect("switch"), self.par_expression()]
        body = [self.expect("{")]
        while not self.at("}"):
            if self.peek() is None:
                raise self.error(["}"])
            group: List[Optional[AstNode]] = []
            while self.at("case") or self.at("default"):
                if self.at("case"):
                    label = [self.leaf(), self.ternary()]
                    while self.at(","):
                        label.append(self.leaf())
                        label.append(self.ternary())
                else:
                    label = [self.leaf()]
                label.append(self.expect(":"))
                group.append(self._node("switch_label", label))
            if not group:
                raise self.error(["case", "default"])
            while not (self.at("case") or self.at("default") or self.at("}")):
                if self.peek() is None:
                    raise self.error(["}"])
                group.append(self.block_statement())
            body.append(self._node("switch_block_group", group))
        body.append(self.expect("}"))
        parts.append(self._node("switch_block", body))
        return self._node("switch_statement", parts)

    # ------------------------------------------------------------ expressions
    def expression(self) -> AstNode:
        lam = self.try_lambda()
        if lam is not None:
            return lam
        lhs = self.ternary()
        tok = self.peek()
        if tok is not None and tok.kind == OPERATOR and tok.text in ASSIGN_OPS and not self._pending_gt:
            op = self.leaf()
            return self._node("assignment_expression", [lhs, op, self.expression()])
        return lhs

    def try_lambda(self) -> Optional[AstNode]:
        if self.at_ident() and self.at("->", 1):
            params = self.leaf()
            arrow = self.leaf()
            return self._node("lambda_expression", [params, arrow, self.lambda_body()])
        if not self.at("("):
            return None
        # find the matching ')' and check for '->'
        depth = 0
        i = self.pos
        while i < len(self.toks):
            t = self.toks[i].text
            if self.toks[i].kind != LITERAL:
                if t == "(":
                    depth += 1
                elif t == ")":
                    depth -= 1
                    if depth == 0:
                        break
            i += 1
        if i + 1 >= len(self.toks) or self.toks[i + 1].text != "->":
            return None
        open_ = self.leaf()
        plist = [open_]
        if not self.at(")"):
            while True:
                if self.at_ident() and (self.at(",", 1) or self.at(")", 1)):
                    plist.append(self.leaf())
                else:
                    plist.append(self.formal_parameter())
                if not self.at(","):
                    break
                plist.append(self.leaf())
        plist.append(self.expect(")"))
        arrow = self.expect("->")
        return self._node(
            "lambda_expression", [self._node("lambda_parameters", plist), arrow, self.lambda_body()]
        )

    def lambda_body(self) -> AstNode:
        if self.at("{"):
            return self.block()
        return self.expression()

    def ternary(self) -> AstNode:
        cond = self.binary(1)
        if self.at("?"):
            q = self.leaf()
            then = self.expression()
            colon = self.expect(":")
            other = self.try_lambda() or self.ternary()
            return self._node("ternary_expression", [cond, q, then, colon, other])
        return cond

    def binary(self, min_prec: int) -> AstNode:
        lhs = self.unary()
        while True:
            tok = self.peek()
            if tok is None or tok.kind == LITERAL or self._pending_gt:
                break
            prec = BINARY_PRECEDENCE.get(tok.text)
            if prec is None or prec < min_prec:
                break
            op = self.leaf()
            if op.leaf_text == "instanceof":
                parts = [lhs, op]
                if self.at("final"):
                    parts.append(self.leaf())
                parts.append(self.type_())
                if self.at_ident():
                    # pattern binding
                    parts.append(self.leaf())
                lhs = self._node("instanceof_expression", parts)
                continue
            rhs = self.binary(prec + 1)
            lhs = self._node("binary_expression", [lhs, op, rhs])
        return lhs

    def unary(self) -> AstNode:
        tok = self.peek()
        if tok is not None and tok.kind == OPERATOR and tok.text in PREFIX_OPS and not self._pending_gt:
            op = self.leaf()
            return self._node("unary_expression", [op, self.unary()])
        if self.at("("):
            cast = self.try_cast()
            if cast is not None:
                return cast
        return self.postfix()

    def try_cast(self) -> Optional[AstNode]:
        def attempt():
            open_ = self.expect("(")
            typ = self.type_()
            types = [typ]
            while self.at("&"):
                types.append(self.leaf())
                types.append(self.type_())
            close = self.expect(")")
            nxt = self.peek()
            if nxt is None:
                raise self.error(["<expression>"])
            is_primitive = (
                len(typ.children) >= 1
                and typ.children[0].is_leaf
                and typ.children[0].leaf_text in PRIMITIVES
                and len(types) == 1
            )
            if is_primitive and not any(c.kind == "dimensions" for c in typ.children):
                ok = nxt.kind in (IDENTIFIER, LITERAL) or nxt.text in ("(", "this", "super", "new", "+", "-", "++", "--", "!", "~") or nxt.kind == KEYWORD and nxt.text in PRIMITIVES
            else:
                ok = nxt.kind in (IDENTIFIER, LITERAL) or nxt.text in ("(", "this", "super", "new", "!", "~") or nxt.kind == KEYWORD and nxt.text in PRIMITIVES
            if not ok:
                raise self.error(["<expression>"])
            return [open_] + types + [close]

        head = self.speculate(attempt)
        if head is None:
            return None
        operand = self.try_lambda() or self.unary()
        return self._node("cast_expression", head + [operand])

    def postfix(self) -> AstNode:
        expr = self.primary()
        while True:
            if self.at("."):
                dot = self.leaf()
                if self.at("<"):
                    targs = self.type_arguments()
                    name = self.expect_ident()
                    expr = self._node("method_invocation", [expr, dot, targs, name, self.arguments()])
                elif self.at_ident():
                    name = self.leaf()
                    if self.at("("):
                        expr = self._node("method_invocation", [expr, dot, name, self.arguments()])
                    else:
                        expr = self._node("field_access", [expr, dot, name])
                elif self.at("class"):
                    expr = self._node("class_literal", [expr, dot, self.leaf()])
                elif self.at("this"):
                    expr = self._node("field_access", [expr, dot, self.leaf()])
                elif self.at("new"):
                    creation = self.creator()
                    creation.children[:0] = [expr, dot]
                    expr = creation
                elif self.at("super"):
                    expr = self._node("field_access", [expr, dot, self.leaf()])
                else:
                    raise self.error(["<identifier>"])
            elif self.at("["):
                expr = self._node("array_access", [expr, self.leaf(), self.expression(), self.expect("]")])
            elif self.at("::"):
                colons = self.leaf()
                if self.at("new"):
                    name = self.leaf()
                else:
                    name = self.expect_ident()
                expr = self._node("method_reference", [expr, colons, name])
            elif (self.at("++") or self.at("--")) and not self._pending_gt:
                expr = self._node("postfix_expression", [expr, self.leaf()])
            else:
                return expr

    def arguments(self) -> AstNode:
        parts = [self.expect("(")]
        if not self.at(")"):
            parts.extend(self.expression_list())
        parts.append(self.expect(")"))
        return self._node("argument_list", parts)

    def primary(self) -> AstNode:
        tok = self.peek()
        if tok is None or self._pending_gt:
            raise self.error(["<expression>"])
        if tok.kind == LITERAL:
            return self._node("literal", [self.leaf()])
        if tok.kind == IDENTIFIER:
            if self.at("(", 1):
                name = self.leaf()
                return self._node("method_invocation", [name, self.arguments()])
            if self.at("[", 1) and self.at("]", 2):
                typ = self._node("type", [self.leaf(), self.dims()])
                return self._class_literal_or_ref(typ)
            if self.at("<", 1):
                # Type<Args>::method
                ref = self.speculate(self._generic_method_ref)
                if ref is not None:
                    return ref
            return self.leaf()
        if tok.text == "(":
            return self.par_expression()
        if tok.kind == KEYWORD:
            if tok.text == "this":
                this = self.leaf()
                if self.at("("):
                    return self._node("explicit_constructor_invocation", [this, self.arguments()])
                return this
            if tok.text == "super":
                sup = self.leaf()
                if self.at("("):
                    return self._node("explicit_constructor_invocation", [sup, self.arguments()])
                if not (self.at(".") or self.at("::")):
                    raise self.error([".", "("])
                return sup
            if tok.text == "new":
                return self.creator()
            if tok.text in PRIMITIVES or tok.text == "void":
                typ = self._node("type", [self.leaf(), self.dims() if self.at("[") else None])
                return self._class_literal_or_ref(typ)
            if tok.text == "switch":
                raise self.error(["<expression>"])
        if self.at("<"):
            raise self.error(["<expression>"])
        raise self.error(["<expression>"])

    def _generic_method_ref(self) -> AstNode:
        typ = self.type_()
        colons = self.expect("::")
        name = self.leaf() if self.at("new") else self.expect_ident()
        return self._node("method_reference", [typ, colons, name])

    def _class_literal_or_ref(self, typ: AstNode) -> AstNode:
        if self.at("::"):
            colons = self.leaf()
            name = self.leaf() if self.at("new") else self.expect_ident()
            return self._node("method_reference", [typ, colons, name])
        dot = self.expect(".")
        return self._node("class_literal", [typ, dot, self.expect("class")])

    def creator(self) -> AstNode:
        new = self.expect("new")
        targs = self.type_arguments() if self.at("<") else None
        typ = self.type_(allow_dims=False)
        if self.at("["):
            parts = [new, typ]
            dim_exprs: List[AstNode] = []
            while self.at("[") and not self.at("]", 1):
                dim_exprs.append(self._node("dimension_expression", [self.leaf(), self.expression(), self.expect("]")]))
            parts.extend(dim_exprs)
            if self.at("["):
                parts.append(self.dims())
            if not dim_exprs:
                if not self.at("{"):
                    raise self.error(["{"])
                parts.append(self.array_initializer())
            return self._node("array_creation_expression", parts)
        parts = [new, targs, typ, self.arguments()]
        if self.at("{"):
            parts.append(self.class_body())
        return self._node("object_creation_expression", parts)


# ---------------------------------------------------------------------------


def _synthetic_tokens(texts: Iterable[str], offset: int) -> List[Token]:
    out = []
    for t in texts:
        if t in ("class", "void"):
            kind = KEYWORD
        elif t.startswith("_"):
            kind = IDENTIFIER
        else:
            kind = SEPARATOR
        out.append(Token(kind, t, (offset, offset), synthetic=True))
    return out


def _mark_synthetic(node: AstNode) -> bool:
    """Flag every internal node that holds a wrapper token; returns the flag."""
    if node.is_leaf:
        return node.synthetic
    flags = [_mark_synthetic(c) for c in node.children]
    node.synthetic = any(flags)
    return node.synthetic


def parse_tokens(tokens: Sequence[Token], eof_offset: int) -> AstNode:
    """Parse an already-lexed token stream, trying the wrapper fallbacks."""
    errors: List[JavaSyntaxError] = []
    attempts = [
        ([], []),
        (["class", WRAP_CLASS, "{"], ["}"]),
        (["class", WRAP_CLASS, "{", "void", WRAP_METHOD, "(", ")", "{"], ["}", "}"]),
    ]
    for prefix, suffix in attempts:
        toks = _synthetic_tokens(prefix, 0) + list(tokens) + _synthetic_tokens(suffix, eof_offset)
        parser = Parser(toks, eof_offset)
        try:
            root = parser.compilation_unit()
        except JavaSyntaxError as exc:
            errors.append(exc)
            continue
        except RecursionError:
            errors.append(JavaSyntaxError(0, ["<shallower nesting>"]))
            continue
        if prefix:
            # leaf token indices must refer to the caller's token list
            shift = len(prefix)
            for node in root.walk():
                if node.is_leaf:
                    node.token_index = -1 if node.synthetic else node.token_index - shift
            _mark_synthetic(root)
        return root
    raise max(errors, key=lambda e: e.offset)


def parse(text: str) -> AstNode:
    """Parse Java source, falling back to class and method wrappers.

    Raises LexError if the text does not lex and JavaSyntaxError if no
    attempt parses.
    """
    return parse_tokens(lex(text), len(text))
