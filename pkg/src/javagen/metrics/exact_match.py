from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional, Sequence, Tuple, Union

from javagen.java.lexer import LexError, lex
from javagen.metrics.bleu import LengthMismatch

Refs = Union[str, Sequence[str]]


def token_signature(text: str) -> Optional[Tuple[Tuple[str, str], ...]]:
    """(kind, text) pairs of the lexed code, or None if it does not lex."""
    try:
        return tuple((t.kind, t.text) for t in lex(text))
    except LexError:
        return None


@dataclass
class ExactMatchResult:
    score: float
    matches: List[bool]
    # indices of samples whose candidate or every reference failed to lex
    lex_failures: List[int] = field(default_factory=list)


def exact_match_detail(candidates: Sequence[str], references: Sequence[Refs]) -> ExactMatchResult:
    if len(candidates) != len(references):
        raise LengthMismatch(f"{len(candidates)} candidates vs {len(references)} references")
    matches: List[bool] = []
    failures: List[int] = []
    for i, (cand, ref) in enumerate(zip(candidates, references)):
        refs = [ref] if isinstance(ref, str) else list(ref)
        c = token_signature(cand)
        r = [s for s in map(token_signature, refs) if s is not None]
        if c is None or not r:
            failures.append(i)
            matches.append(False)
            continue
        matches.append(any(c == s for s in r))
    score = 100.0 * sum(matches) / len(matches) if matches else 0.0
    return ExactMatchResult(score, matches, failures)


def exact_match(candidates: Sequence[str], references: Sequence[Refs]) -> float:
    """Percentage of candidates whose token sequence equals some reference."""
    return exact_match_detail(candidates, references).score
