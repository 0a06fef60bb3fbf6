"""Loading, cleaning and summarizing CONCODE-style line-delimited corpora.

Each line is a JSON object with exactly the string keys ``nl`` and ``code``.
Unimodal (code-only) data uses an empty ``nl``.
"""

from __future__ import annotations

import json
import os
from collections import Counter
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

from javagen.java.lexer import LexError, lex

SPLITS = ("train", "valid", "test")

EMPTY_CODE = "empty_code"
INVALID_UTF8 = "invalid_utf8"
LEX_FAILURE = "lex_failure"
TOO_LONG = "too_long"


class MissingFile(FileNotFoundError):
    pass


class MalformedLine(ValueError):
    def __init__(self, line_number: int, reason: str = ""):
        self.line_number = line_number
        super().__init__(f"malformed record on line {line_number}" + (f": {reason}" if reason else ""))


@dataclass(frozen=True)
class Sample:
    id: int
    nl: str
    code: str
    split: str = "train"
    # set when the raw line held bytes that are not valid UTF-8
    bad_bytes: bool = False


def _check_split(split: str) -> str:
    if split not in SPLITS:
        raise ValueError(f"split must be one of {SPLITS}, got {split!r}")
    return split


def load_split(path, split: str = "train") -> List[Sample]:
    """Read one split file; ids are assigned 0..n-1 in file order."""
    _check_split(split)
    if not os.path.isfile(path):
        raise MissingFile(f"no such file: {path}")
    samples: List[Sample] = []
    with open(path, "rb") as fh:
        for lineno, raw in enumerate(fh, start=1):
            bad = False
            try:
                line = raw.decode("utf-8")
            except UnicodeDecodeError:
                line = raw.decode("utf-8", errors="replace")
                bad = True
            if not line.strip():
                # tolerate a trailing blank line only
                continue
            try:
                rec = json.loads(line)
            except json.JSONDecodeError as exc:
                raise MalformedLine(lineno, str(exc)) from None
            if not isinstance(rec, dict) or set(rec) != {"nl", "code"}:
                raise MalformedLine(lineno, "expected exactly the keys 'nl' and 'code'")
            if not isinstance(rec["nl"], str) or not isinstance(rec["code"], str):
                raise MalformedLine(lineno, "'nl' and 'code' must be strings")
            samples.append(Sample(len(samples), rec["nl"], rec["code"], split, bad))
    return samples


def write_split(samples: Sequence[Sample], path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        for s in samples:
            fh.write(json.dumps({"nl": s.nl, "code": s.code}, ensure_ascii=False) + "\n")


def load_dataset(paths: Mapping[str, str]) -> Dict[str, List[Sample]]:
    return {split: load_split(path, split) for split, path in paths.items()}


# ------------------------------------------------------------------ cleaning


@dataclass
class CleaningRules:
    empty_code: bool = True
    invalid_utf8: bool = True
    lex_failure: bool = True
    max_code_chars: Optional[int] = 100_000

    @classmethod
    def from_dict(cls, d: Mapping) -> "CleaningRules":
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown cleaning rule(s): {sorted(unknown)}")
        return cls(**d)


@dataclass
class CleaningReport:
    removed_per_split: Dict[str, int] = field(default_factory=dict)
    removal_reasons: Dict[str, int] = field(default_factory=dict)
    original_total: int = 0
    retained_total: int = 0

    def as_dict(self) -> dict:
        return asdict(self)


def _failure(sample: Sample, rules: CleaningRules) -> Optional[str]:
    """First failing rule, in a fixed order, or None."""
    if rules.empty_code and not sample.code.strip():
        return EMPTY_CODE
    if rules.invalid_utf8 and sample.bad_bytes:
        return INVALID_UTF8
    if rules.max_code_chars is not None and len(sample.code) > rules.max_code_chars:
        return TOO_LONG
    if rules.lex_failure:
        try:
            lex(sample.code)
        except LexError:
            return LEX_FAILURE
    return None


def clean(samples: Sequence[Sample], rules: Optional[CleaningRules] = None) -> Tuple[List[Sample], CleaningReport]:
    """Drop samples failing any enabled rule; ids are renumbered per split."""
    rules = rules or CleaningRules()
    report = CleaningReport(original_total=len(samples))
    kept: List[Sample] = []
    next_id: Counter = Counter()
    for s in samples:
        report.removed_per_split.setdefault(s.split, 0)
        reason = _failure(s, rules)
        if reason is None:
            kept.append(Sample(next_id[s.split], s.nl, s.code, s.split, s.bad_bytes))
            next_id[s.split] += 1
        else:
            report.removed_per_split[s.split] += 1
            report.removal_reasons[reason] = report.removal_reasons.get(reason, 0) + 1
    report.retained_total = len(kept)
    return kept, report


def clean_dataset(
    dataset: Mapping[str, Sequence[Sample]], rules: Optional[CleaningRules] = None
) -> Tuple[Dict[str, List[Sample]], CleaningReport]:
    flat = [s for split in SPLITS for s in dataset.get(split, [])]
    kept, report = clean(flat, rules)
    for split in dataset:
        report.removed_per_split.setdefault(split, 0)
    out: Dict[str, List[Sample]] = {split: [] for split in dataset}
    for s in kept:
        out[s.split].append(s)
    return out, report


# --------------------------------------------------------------------- stats


@dataclass
class LengthStats:
    min: int
    max: int
    mean: float


@dataclass
class CorpusStats:
    counts: Dict[str, int]
    nl_length: Dict[str, Optional[LengthStats]]
    code_length: Dict[str, Optional[LengthStats]]

    @property
    def total(self) -> int:
        return sum(self.counts.values())

    def as_dict(self) -> dict:
        d = asdict(self)
        d["total"] = self.total
        return d


def _length_stats(values: Sequence[int]) -> Optional[LengthStats]:
    if not values:
        return None
    return LengthStats(min(values), max(values), sum(values) / len(values))


def stats(dataset: Mapping[str, Sequence[Sample]]) -> CorpusStats:
    counts, nl, code = {}, {}, {}
    for split in SPLITS:
        items = list(dataset.get(split, []))
        counts[split] = len(items)
        nl[split] = _length_stats([len(s.nl) for s in items])
        code[split] = _length_stats([len(s.code) for s in items])
    return CorpusStats(counts, nl, code)


def build_pretraining_pool(dataset: Mapping[str, Sequence[Sample]]) -> List[str]:
    """Code fields of train, valid, test (in that order); nl is dropped."""
    return [s.code for split in SPLITS for s in dataset.get(split, [])]
