"""BLEU, exact match and CodeBLEU for generated Java."""

from javagen.metrics.bleu import LengthMismatch, corpus_bleu, weighted_ngram_match
from javagen.metrics.codebleu import CodeBleuWeights, ast_match, codebleu, combine, dataflow_match, tokenize_code
from javagen.metrics.exact_match import exact_match, exact_match_detail
from javagen.metrics.report import EvalReport, compare, evaluate, evaluate_file, load_baselines, read_references

__all__ = [
    "CodeBleuWeights",
    "EvalReport",
    "LengthMismatch",
    "ast_match",
    "codebleu",
    "combine",
    "compare",
    "corpus_bleu",
    "dataflow_match",
    "evaluate",
    "evaluate_file",
    "exact_match",
    "exact_match_detail",
    "load_baselines",
    "read_references",
    "tokenize_code",
    "weighted_ngram_match",
]
