"""Java front-end: lexer, parser, subtree enumeration and def-use extraction."""

from javagen.java.ast import AstNode, enumerate_subtrees
from javagen.java.dataflow import FlowEdge, extract_dataflow
from javagen.java.lexer import LexError, Token, lex, lexemes
from javagen.java.parser import JavaSyntaxError, parse

__all__ = [
    "AstNode",
    "FlowEdge",
    "JavaSyntaxError",
    "LexError",
    "Token",
    "enumerate_subtrees",
    "extract_dataflow",
    "lex",
    "lexemes",
    "parse",
]
