"""Maximal-munch lexer for the Java lexical grammar.

Comments and whitespace are consumed but never emitted. Token spans are
character offsets into the input string.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import List, Tuple

KEYWORDS = frozenset(
    """
    abstract assert boolean break byte case catch char class const continue
    default do double else enum extends final finally float for goto if
    implements import instanceof int interface long native new package private
    protected public return short static strictfp super switch synchronized
    this throw throws transient try void volatile while
    """.split()
)

# true/false/null are literals, not keywords
LITERAL_WORDS = frozenset({"true", "false", "null"})

# longest first so that a linear scan implements maximal munch
OPERATORS = sorted(
    """
    >>>= <<= >>= >>> ... -> :: ++ -- && || == != <= >= += -= *= /= &= |= ^= %=
    << >> = > < ! ~ ? : + - * / & | ^ %
    """.split(),
    key=len,
    reverse=True,
)
SEPARATORS = frozenset("( ) { } [ ] ; , . ... @".split())

KEYWORD = "keyword"
IDENTIFIER = "identifier"
LITERAL = "literal"
OPERATOR = "operator"
SEPARATOR = "separator"

_NUMBER = re.compile(
    r"""
    0[xX][0-9a-fA-F_]*(?:\.[0-9a-fA-F_]*)?(?:[pP][+-]?[0-9_]+)?[lLfFdD]?
  | 0[bB][01_]+[lL]?
  | (?:[0-9][0-9_]*\.?[0-9_]*|\.[0-9][0-9_]*)(?:[eE][+-]?[0-9_]+)?[lLfFdD]?
    """,
    re.VERBOSE,
)
_IDENT_START = re.compile(r"[^\W\d]|[$]", re.UNICODE)
_IDENT = re.compile(r"(?:[^\W]|[$])+", re.UNICODE)


class LexError(ValueError):
    """Raised for unterminated literals/comments or illegal characters."""

    def __init__(self, offset: int, message: str = "lexical error"):
        super().__init__(f"{message} at offset {offset}")
        self.offset = offset


@dataclass(frozen=True)
class Token:
    kind: str
    text: str
    span: Tuple[int, int]
    synthetic: bool = False

    @property
    def start(self) -> int:
        return self.span[0]


def _skip_string(text: str, pos: int, quote: str) -> int:
    """Return the offset just past a quoted literal starting at ``pos``."""
    i = pos + 1
    n = len(text)
    while i < n:
        ch = text[i]
        if ch == "\\":
            i += 2
            continue
        if ch == quote:
            return i + 1
        if ch == "\n":
            break
        i += 1
    raise LexError(pos, "unterminated literal")


def _skip_text_block(text: str, pos: int) -> int:
    end = text.find('"""', pos + 3)
    while end != -1 and text[end - 1] == "\\":
        end = text.find('"""', end + 1)
    if end == -1:
        raise LexError(pos, "unterminated text block")
    return end + 3


def lex(text: str) -> List[Token]:
    tokens: List[Token] = []
    pos = 0
    n = len(text)
    while pos < n:
        ch = text[pos]
        if ch.isspace():
            pos += 1
            continue
        if text.startswith("//", pos):
            nl = text.find("\n", pos)
            pos = n if nl == -1 else nl + 1
            continue
        if text.startswith("/*", pos):
            end = text.find("*/", pos + 2)
            if end == -1:
                raise LexError(pos, "unterminated comment")
            pos = end + 2
            continue

        if text.startswith('"""', pos):
            end = _skip_text_block(text, pos)
            tokens.append(Token(LITERAL, text[pos:end], (pos, end)))
            pos = end
            continue
        if ch == '"' or ch == "'":
            end = _skip_string(text, pos, ch)
            tokens.append(Token(LITERAL, text[pos:end], (pos, end)))
            pos = end
            continue

        if ch.isdigit() or (ch == "." and pos + 1 < n and text[pos + 1].isdigit()):
            m = _NUMBER.match(text, pos)
            end = m.end()
            tokens.append(Token(LITERAL, text[pos:end], (pos, end)))
            pos = end
            continue

        if _IDENT_START.match(ch) or ch == "_":
            m = _IDENT.match(text, pos)
            word = m.group()
            end = m.end()
            if word in KEYWORDS:
                kind = KEYWORD
            elif word in LITERAL_WORDS:
                kind = LITERAL
            else:
                kind = IDENTIFIER
            tokens.append(Token(kind, word, (pos, end)))
            pos = end
            continue

        for op in OPERATORS:
            if text.startswith(op, pos):
                end = pos + len(op)
                kind = SEPARATOR if op in SEPARATORS else OPERATOR
                tokens.append(Token(kind, op, (pos, end)))
                pos = end
                break
        else:
            if ch in SEPARATORS:
                tokens.append(Token(SEPARATOR, ch, (pos, pos + 1)))
                pos += 1
            else:
                raise LexError(pos, f"illegal character {ch!r}")
    return tokens


def lexemes(text: str) -> List[str]:
    """Token texts only; the tokenization used by the n-gram metrics."""
    return [t.text for t in lex(text)]
