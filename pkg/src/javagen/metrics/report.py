"""Evaluation reports, file-level evaluation and baseline comparison tables."""

from __future__ import annotations

import hashlib
import json
import os
from dataclasses import asdict, dataclass, field
from importlib import resources
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

from javagen.corpus import MalformedLine, MissingFile
from javagen.metrics.bleu import LengthMismatch
from javagen.metrics.codebleu import CodeBleuWeights, codebleu
from javagen.metrics.exact_match import exact_match_detail

SCORE_COLUMNS = ("BLEU", "EM", "CodeBLEU")


def sha256_bytes(data: bytes) -> str:
    return hashlib.sha256(data).hexdigest()


def sha256_file(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


@dataclass
class EvalReport:
    bleu: float
    em: float
    codebleu: float
    components: Dict[str, Optional[float]]
    n_samples: int
    n_parse_failures: int
    n_lex_failures: int = 0
    fingerprints: Dict[str, str] = field(default_factory=dict)
    weights: Dict[str, float] = field(default_factory=dict)

    def as_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.as_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, d: Mapping) -> "EvalReport":
        return cls(**{k: d[k] for k in cls.__dataclass_fields__ if k in d})

    def table(self, name: str = "model") -> str:
        return render_table([(name, self.bleu, self.em, self.codebleu)])


def render_table(rows: Sequence[Tuple[str, float, float, float]], delta_from: Optional[str] = None) -> str:
    """Fixed-order table: model, BLEU, EM, CodeBLEU (and deltas if asked)."""
    base = None
    if delta_from is not None:
        match = [r for r in rows if r[0] == delta_from]
        if not match:
            raise KeyError(f"no row named {delta_from!r}")
        base = match[0]
    header = ["Model", *SCORE_COLUMNS]
    if base is not None:
        header += [f"d{c}" for c in SCORE_COLUMNS]
    body = []
    for name, *scores in rows:
        cells = [name] + [f"{s:.2f}" for s in scores]
        if base is not None:
            cells += [f"{s - b:+.2f}" for s, b in zip(scores, base[1:])]
        body.append(cells)
    widths = [max(len(r[i]) for r in [header] + body) for i in range(len(header))]

    def fmt(cells):
        return "| " + " | ".join(c.ljust(w) if i == 0 else c.rjust(w) for i, (c, w) in enumerate(zip(cells, widths))) + " |"

    sep = "|" + "|".join("-" * (w + 2) for w in widths) + "|"
    return "\n".join([fmt(header), sep, *map(fmt, body)])


def evaluate(
    candidates: Sequence[str],
    references: Sequence,
    weights: Optional[CodeBleuWeights] = None,
    keyword_weight_ratio: float = 5.0,
) -> EvalReport:
    if len(candidates) != len(references):
        raise LengthMismatch(f"{len(candidates)} predictions vs {len(references)} references")
    weights = weights or CodeBleuWeights()
    cb = codebleu(candidates, references, weights, keyword_weight_ratio)
    em = exact_match_detail(candidates, references)
    return EvalReport(
        bleu=100.0 * cb.components["ngram"],
        em=em.score,
        codebleu=cb.score,
        components=dict(cb.components),
        n_samples=len(candidates),
        n_parse_failures=cb.n_parse_failures,
        n_lex_failures=len(em.lex_failures),
        weights=dict(zip(("alpha", "beta", "gamma", "delta"), weights.as_tuple())),
    )


def _read_bytes(path) -> bytes:
    if not os.path.exists(path):
        raise MissingFile(f"no such file: {path}")
    with open(path, "rb") as fh:
        return fh.read()


def _split_lines(data: bytes) -> List[str]:
    lines = data.decode("utf-8").split("\n")
    if lines and lines[-1] == "":
        lines.pop()
    return [ln[:-1] if ln.endswith("\r") else ln for ln in lines]


def _references_from_lines(lines: List[str]) -> List[str]:
    first = next((ln for ln in lines if ln.strip()), "")
    try:
        probe = json.loads(first)
    except json.JSONDecodeError:
        probe = None
    if not isinstance(probe, dict):
        return lines
    refs = []
    for i, ln in enumerate(lines, start=1):
        if not ln.strip():
            continue
        try:
            rec = json.loads(ln)
        except json.JSONDecodeError as exc:
            raise MalformedLine(i, str(exc)) from None
        if not isinstance(rec, dict) or not isinstance(rec.get("code"), str):
            raise MalformedLine(i, "record lacks a string 'code' field")
        refs.append(rec["code"])
    return refs


def read_references(path) -> List[str]:
    """Code strings from a CONCODE record file or a one-code-per-line file.

    The file is treated as records when its first non-blank line is a JSON
    object; otherwise every line is one reference.
    """
    return _references_from_lines(_split_lines(_read_bytes(path)))


def evaluate_file(
    predictions_path,
    references_path,
    weights: Optional[CodeBleuWeights] = None,
    keyword_weight_ratio: float = 5.0,
) -> EvalReport:
    pred_bytes = _read_bytes(predictions_path)
    ref_bytes = _read_bytes(references_path)
    preds = _split_lines(pred_bytes)
    refs = _references_from_lines(_split_lines(ref_bytes))
    if len(preds) != len(refs):
        raise LengthMismatch(f"{len(preds)} predictions vs {len(refs)} references")
    report = evaluate(preds, refs, weights, keyword_weight_ratio)
    report.fingerprints = {"predictions": sha256_bytes(pred_bytes), "references": sha256_bytes(ref_bytes)}
    return report


def load_baselines(path=None) -> List[Tuple[str, float, float, float]]:
    """Published reference rows; defaults to the bundled table."""
    if path is None:
        text = resources.files("javagen.data").joinpath("baselines.json").read_text(encoding="utf-8")
    else:
        if not os.path.isfile(path):
            raise MissingFile(f"no such file: {path}")
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    return [(r["model"], float(r["bleu"]), float(r["em"]), float(r["codebleu"])) for r in json.loads(text)]


def compare(
    reports: Mapping[str, EvalReport],
    baselines: Sequence[Tuple[str, float, float, float]] = (),
    delta_from: Optional[str] = None,
) -> str:
    """Baseline rows first, then our reports in the given order."""
    rows = list(baselines) + [(name, r.bleu, r.em, r.codebleu) for name, r in reports.items()]
    return render_table(rows, delta_from)
