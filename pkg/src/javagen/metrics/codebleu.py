from __future__ import annotations

from collections import Counter
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence, Union

from javagen.java import JavaSyntaxError, LexError, enumerate_subtrees, extract_dataflow, lex, parse
from javagen.metrics.bleu import LengthMismatch, corpus_bleu, weighted_ngram_match

Refs = Union[str, Sequence[str]]
COMPONENTS = ("ngram", "weighted_ngram", "ast", "dataflow")


@dataclass(frozen=True)
class CodeBleuWeights:
    alpha: float = 0.25
    beta: float = 0.25
    gamma: float = 0.25
    delta: float = 0.25

    def __post_init__(self):
        vals = self.as_tuple()
        if any(v < 0 for v in vals):
            raise ValueError("CodeBLEU weights must be non-negative")
        if sum(vals) <= 0:
            raise ValueError("at least one CodeBLEU weight must be positive")

    def as_tuple(self):
        return (self.alpha, self.beta, self.gamma, self.delta)

    def normalized(self) -> "CodeBleuWeights":
        s = sum(self.as_tuple())
        return CodeBleuWeights(*(v / s for v in self.as_tuple()))


def tokenize_code(text: str) -> List[str]:
    """Java lexemes; text the lexer rejects falls back to whitespace split."""
    try:
        return [t.text for t in lex(text)]
    except LexError:
        return text.split()


def _refs(ref: Refs) -> List[str]:
    return [ref] if isinstance(ref, str) else list(ref)


_parse_cache: Dict[str, object] = {}


def try_parse(text: str):
    """Parsed AST or None; results are memoized per text."""
    if text in _parse_cache:
        return _parse_cache[text]
    try:
        ast = parse(text)
    except (JavaSyntaxError, LexError):
        ast = None
    if len(_parse_cache) > 50_000:
        _parse_cache.clear()
    _parse_cache[text] = ast
    return ast


def _best_clipped_ratio(cand: Counter, refs: Sequence[Counter]) -> Optional[float]:
    best = None
    for ref in refs:
        total = sum(ref.values())
        if total == 0:
            continue
        matched = sum(min(c, cand[k]) for k, c in ref.items())
        ratio = matched / total
        if best is None or ratio > best:
            best = ratio
    return best


def ast_match(candidate: str, references: Refs) -> Optional[float]:
    """Share of the best reference's subtrees found (clipped) in the candidate.

    None when no reference parses; 0.0 when only the candidate fails.
    """
    ref_trees = [enumerate_subtrees(t) for t in map(try_parse, _refs(references)) if t is not None]
    ref_trees = [r for r in ref_trees if r]
    if not ref_trees:
        return None
    cand = try_parse(candidate)
    if cand is None:
        return 0.0
    return _best_clipped_ratio(enumerate_subtrees(cand), ref_trees)


def dataflow_match(candidate: str, references: Refs) -> Optional[float]:
    """Clipped overlap of normalized def-use edges with the best reference.

    None (component absent) when no reference has any edge.
    """
    ref_edges = [extract_dataflow(t) for t in map(try_parse, _refs(references)) if t is not None]
    ref_edges = [r for r in ref_edges if r]
    if not ref_edges:
        return None
    cand = try_parse(candidate)
    if cand is None:
        return 0.0
    return _best_clipped_ratio(extract_dataflow(cand), ref_edges)


@dataclass
class CodeBleuResult:
    score: float
    components: Dict[str, Optional[float]]
    n_parse_failures: int


def _mean(values: Sequence[Optional[float]]) -> Optional[float]:
    present = [v for v in values if v is not None]
    return sum(present) / len(present) if present else None


def codebleu(
    candidates: Sequence[str],
    references: Sequence[Refs],
    weights: Optional[CodeBleuWeights] = None,
    keyword_weight_ratio: float = 5.0,
    tokenize: Callable[[str], List[str]] = tokenize_code,
) -> CodeBleuResult:
    """Weighted sum of BLEU, keyword-weighted BLEU, AST and data-flow match.

    The n-gram terms are pooled over the corpus; the AST and data-flow terms
    are averaged over the samples where they are defined. Components that are
    undefined for the whole corpus drop out and the remaining weights are
    rescaled to sum to one.
    """
    if len(candidates) != len(references):
        raise LengthMismatch(f"{len(candidates)} candidates vs {len(references)} references")
    weights = weights or CodeBleuWeights()
    cand_toks = [tokenize(c) for c in candidates]
    ref_toks = [[tokenize(r) for r in _refs(ref)] for ref in references]
    components: Dict[str, Optional[float]] = {
        "ngram": corpus_bleu(cand_toks, ref_toks) / 100.0 if candidates else 0.0,
        "weighted_ngram": weighted_ngram_match(cand_toks, ref_toks, keyword_weight_ratio) if candidates else 0.0,
        "ast": _mean([ast_match(c, r) for c, r in zip(candidates, references)]),
        "dataflow": _mean([dataflow_match(c, r) for c, r in zip(candidates, references)]),
    }
    n_fail = sum(1 for c in candidates if try_parse(c) is None)
    return CodeBleuResult(combine(components, weights), components, n_fail)


def combine(components: Dict[str, Optional[float]], weights: Optional[CodeBleuWeights] = None) -> float:
    """100 x weighted sum of the present components.

    Weights of absent (None) components are dropped and the rest rescaled to
    sum to one; with nothing weighted left the score is 0.
    """
    w = dict(zip(COMPONENTS, (weights or CodeBleuWeights()).as_tuple()))
    present = [k for k in COMPONENTS if components.get(k) is not None]
    total_w = sum(w[k] for k in present)
    if total_w == 0:
        return 0.0
    return 100.0 * sum(w[k] * components[k] for k in present) / total_w
