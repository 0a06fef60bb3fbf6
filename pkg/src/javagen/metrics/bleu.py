"""Corpus-level BLEU and its keyword-weighted variant.

Counts are pooled over the whole corpus before taking the geometric mean of
the clipped n-gram precisions. An order whose pooled numerator is zero uses
``1 / (2 * denominator)`` instead; an order with no candidate n-grams at all
is left out of the mean.
"""

from __future__ import annotations

import math
from collections import Counter
from typing import Callable, List, Optional, Sequence, Tuple, Union

from javagen.java.lexer import KEYWORDS

Tokens = Sequence[str]
RefSet = Union[Tokens, Sequence[Tokens]]


class LengthMismatch(ValueError):
    pass


def ngrams(tokens: Tokens, n: int) -> Counter:
    return Counter(tuple(tokens[i:i + n]) for i in range(len(tokens) - n + 1))


def as_reference_set(ref) -> List[List[str]]:
    """Accept one token list or a list of alternative token lists."""
    if len(ref) and not isinstance(ref[0], str):
        return [list(r) for r in ref]
    return [list(ref)]


def closest_ref_length(cand_len: int, refs: Sequence[Tokens]) -> int:
    return min((abs(len(r) - cand_len), len(r)) for r in refs)[1]


def _pooled_score(
    candidates: Sequence[Tokens],
    references: Sequence[RefSet],
    max_n: int,
    weight: Callable[[Tuple[str, ...]], float],
) -> float:
    if len(candidates) != len(references):
        raise LengthMismatch(f"{len(candidates)} candidates vs {len(references)} references")
    num = [0.0] * max_n
    den = [0.0] * max_n
    cand_len = 0
    ref_len = 0
    for cand, ref in zip(candidates, references):
        refs = as_reference_set(ref)
        cand_len += len(cand)
        ref_len += closest_ref_length(len(cand), refs)
        for n in range(1, max_n + 1):
            counts = ngrams(cand, n)
            if not counts:
                continue
            max_ref: Counter = Counter()
            for r in refs:
                max_ref |= ngrams(r, n)
            for g, c in counts.items():
                w = weight(g)
                num[n - 1] += w * min(c, max_ref[g])
                den[n - 1] += w * c
    if cand_len == 0:
        return 0.0
    logs = []
    for n in range(max_n):
        if den[n] == 0:
            continue
        p = num[n] / den[n] if num[n] > 0 else 1.0 / (2.0 * den[n])
        logs.append(math.log(p))
    bp = 1.0 if cand_len > ref_len else math.exp(1.0 - ref_len / cand_len)
    return bp * math.exp(sum(logs) / len(logs))


def corpus_bleu(candidates: Sequence[Tokens], references: Sequence[RefSet], max_n: int = 4) -> float:
    """BLEU as a percentage in [0, 100]."""
    return 100.0 * _pooled_score(candidates, references, max_n, lambda g: 1.0)


def weighted_ngram_match(
    candidates: Sequence[Tokens],
    references: Sequence[RefSet],
    keyword_weight_ratio: float = 5.0,
    max_n: int = 4,
    keywords: Optional[frozenset] = None,
) -> float:
    """BLEU-style fraction in [0, 1] where n-grams starting with a keyword
    count ``keyword_weight_ratio`` times as much as the others."""
    kw = KEYWORDS if keywords is None else keywords

    def weight(g):
        return keyword_weight_ratio if g[0] in kw else 1.0

    return _pooled_score(candidates, references, max_n, weight)
