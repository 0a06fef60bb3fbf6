"""Command-line entry point: ``javagen <subcommand> [options]``.

Exit codes: 0 success, 2 usage or config error, 3 data error, 4 runtime
error. Failures print one JSON object on stderr:
``{"error": <kind>, "exit_code": <n>, "message": <text>}``.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import os
import sys
from typing import Dict, List, Optional, Sequence

from javagen import __version__
from javagen import checkpoint as ckpt_io
from javagen.corpus import (
    SPLITS,
    CleaningRules,
    MalformedLine,
    MissingFile,
    build_pretraining_pool,
    clean_dataset,
    load_dataset,
    load_split,
    stats,
    write_split,
)
from javagen.denoise import TooManySpans, corrupt_many, write_shard
from javagen.java import JavaSyntaxError, LexError, enumerate_subtrees, extract_dataflow, lex, parse
from javagen.metrics import CodeBleuWeights, EvalReport, LengthMismatch, compare, evaluate_file, load_baselines
from javagen.metrics.report import sha256_file
from javagen.model import InvalidConfig, ShapeMismatch
from javagen.tokenizer import EmptyDataset, UnknownId, VocabTooSmall, Vocabulary, max_pair_length, train_vocab
from javagen.train import (
    ConfigMismatch,
    InvalidRunConfig,
    TrainingRunConfig,
    VocabMismatch,
    generate,
    model_from_checkpoint,
    run_grid,
    set_sequential,
    train,
)

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_DATA = 3
EXIT_RUNTIME = 4

USAGE_ERRORS = (InvalidRunConfig, InvalidConfig, VocabTooSmall)
DATA_ERRORS = (
    MissingFile,
    FileNotFoundError,
    MalformedLine,
    LengthMismatch,
    VocabMismatch,
    ConfigMismatch,
    ckpt_io.CorruptCheckpoint,
    EmptyDataset,
    UnknownId,
    TooManySpans,
    ShapeMismatch,
    UnicodeDecodeError,
    json.JSONDecodeError,
)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise UsageError(f"{message}\n{self.format_usage().strip()}")


def _fail(kind: str, code: int, message: str) -> int:
    sys.stderr.write(json.dumps({"error": kind, "exit_code": code, "message": message}) + "\n")
    return code


# ----------------------------------------------------------------- helpers


def _write_json(path, obj) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True, ensure_ascii=False)
        fh.write("\n")


def _fingerprints(paths: Sequence[str]) -> Dict[str, str]:
    return {p: sha256_file(p) for p in paths if p and os.path.isfile(p)}


def write_manifest(
    args: argparse.Namespace, outputs: Sequence[str], inputs: Sequence[str], config: Optional[dict] = None
) -> str:
    """Record what produced ``outputs``; no timestamps, so reruns match."""
    first = outputs[0]
    if os.path.isdir(first):
        path = os.path.join(first, "manifest.json")
    else:
        path = f"{first}.manifest.json"
    resolved = config if config is not None else {k: v for k, v in vars(args).items() if k != "handler"}
    _write_json(
        path,
        {
            "subcommand": args.command,
            "config": resolved,
            "inputs": _fingerprints(inputs),
            "outputs": _fingerprints([o for o in outputs if not os.path.isdir(o)]),
            "version": __version__,
            "seed": resolved.get("seed"),
        },
    )
    return path


def _emit(text: str, out: Optional[str]) -> None:
    if out:
        with open(out, "w", encoding="utf-8") as fh:
            fh.write(text if text.endswith("\n") else text + "\n")
    else:
        print(text)


def _split_paths(args) -> Dict[str, str]:
    paths = {split: getattr(args, split) for split in SPLITS if getattr(args, split)}
    if not paths:
        raise UsageError("give at least one of --train/--valid/--test")
    return paths


def read_sources(path) -> List[str]:
    """nl fields of a record file, or one source text per line."""
    if not os.path.isfile(path):
        raise MissingFile(f"no such file: {path}")
    with open(path, encoding="utf-8") as fh:
        first = fh.readline()
    try:
        is_records = isinstance(json.loads(first), dict)
    except json.JSONDecodeError:
        is_records = False
    if is_records:
        return [s.nl for s in load_split(path)]
    with open(path, encoding="utf-8") as fh:
        return fh.read().splitlines()


# ------------------------------------------------------------- subcommands


def cmd_corpus_stats(args) -> int:
    paths = _split_paths(args)
    result = stats(load_dataset(paths)).as_dict()
    _emit(json.dumps(result, indent=2, sort_keys=True), args.out)
    if args.out:
        write_manifest(args, [args.out], list(paths.values()))
    return EXIT_OK


def cmd_clean(args) -> int:
    paths = _split_paths(args)
    rules = CleaningRules()
    if args.rules:
        with open(args.rules, encoding="utf-8") as fh:
            try:
                rules = CleaningRules.from_dict(json.load(fh))
            except (TypeError, ValueError) as exc:
                raise UsageError(f"bad cleaning rules: {exc}") from None
    cleaned, report = clean_dataset(load_dataset(paths), rules)
    os.makedirs(args.out_dir, exist_ok=True)
    outputs = [args.out_dir]
    for split, samples in cleaned.items():
        out = os.path.join(args.out_dir, f"{split}.jsonl")
        write_split(samples, out)
        outputs.append(out)
    report_path = os.path.join(args.out_dir, "cleaning_report.json")
    _write_json(report_path, report.as_dict())
    write_manifest(args, outputs + [report_path], list(paths.values()))
    print(json.dumps(report.as_dict(), sort_keys=True))
    return EXIT_OK


def cmd_tokenizer_train(args) -> int:
    texts: List[str] = []
    for p in args.data:
        for s in load_split(p):
            texts.extend(t for t in (s.nl, s.code) if t)
    vocab = train_vocab(texts, args.vocab_size)
    vocab.save(args.out)
    write_manifest(args, [args.out], args.data)
    print(json.dumps({"vocab_size": vocab.size, "merges": len(vocab.merges), "fingerprint": vocab.fingerprint}))
    return EXIT_OK


def cmd_seq_lengths(args) -> int:
    vocab = Vocabulary.load(args.vocab)
    samples = [s for p in args.data for s in load_split(p)]
    profile = max_pair_length(vocab, samples)
    _emit(json.dumps(profile.as_dict(), sort_keys=True), args.out)
    if args.out:
        write_manifest(args, [args.out], [args.vocab, *args.data])
    return EXIT_OK


def cmd_make_pretrain_shards(args) -> int:
    vocab = Vocabulary.load(args.vocab)
    docs = build_pretraining_pool({"train": [s for p in args.data for s in load_split(p)]})
    encoded = [vocab.encode(d)[: args.input_len - 1] for d in docs]
    examples = corrupt_many(encoded, args.rate, args.mean_span, args.seed, vocab.size)
    with open(args.out, "wb") as fh:
        write_shard(examples, fh)
    write_manifest(args, [args.out], [args.vocab, *args.data])
    print(json.dumps({"examples": len(examples), "out": args.out}))
    return EXIT_OK


_CONFIG_FIELDS = [f for f in dataclasses.fields(TrainingRunConfig) if f.name != "mode"]


def _add_config_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON run config; flags override its keys")
    p.add_argument("--out", required=True, help="final checkpoint path")
    for f in _CONFIG_FIELDS:
        flag = "--" + f.name.replace("_", "-")
        if f.name in ("data_paths",):
            p.add_argument(flag, nargs="+", default=None)
        elif f.name == "model_overrides":
            p.add_argument(flag, type=json.loads, default=None, help="JSON object of ModelConfig fields")
        else:
            kind = {"int": int, "float": float}.get(str(f.type).replace("Optional[", "").rstrip("]"), str)
            p.add_argument(flag, type=kind, default=None)


def resolve_run_config(args, mode: str) -> TrainingRunConfig:
    base: dict = {}
    if args.config:
        with open(args.config, encoding="utf-8") as fh:
            base = json.load(fh)
    for f in _CONFIG_FIELDS:
        v = getattr(args, f.name)
        if v is not None:
            base[f.name] = v
    if base.setdefault("mode", mode) != mode:
        raise InvalidRunConfig(f"config has mode={base['mode']!r} but the subcommand is {mode!r}")
    return TrainingRunConfig.from_dict(base)


def _run_training(args, mode: str) -> int:
    config = resolve_run_config(args, mode)
    if not config.vocab_path:
        raise InvalidRunConfig("vocab_path is required")
    if not config.data_paths:
        raise InvalidRunConfig("data_paths is required")
    vocab = Vocabulary.load(config.vocab_path)
    result = train(config, vocab)
    ckpt_io.save(result.checkpoint, args.out)
    inputs = [config.vocab_path, *config.data_paths, config.init_checkpoint or "", config.resume_from or ""]
    write_manifest(args, [args.out], inputs, config=config.to_dict())
    print(
        json.dumps(
            {
                "step": result.checkpoint.step,
                "final_loss": result.losses[-1] if result.losses else None,
                "samples_truncated": result.samples_truncated,
                "out": args.out,
            }
        )
    )
    return EXIT_OK


def cmd_pretrain(args) -> int:
    return _run_training(args, "pretrain")


def cmd_finetune(args) -> int:
    return _run_training(args, "finetune")


def cmd_generate(args) -> int:
    ck = ckpt_io.load(args.checkpoint)
    vocab = Vocabulary.load(args.vocab)
    if vocab.fingerprint != ck.vocab_fingerprint:
        raise VocabMismatch("vocabulary differs from the checkpoint's")
    sources = read_sources(args.input)
    preds = generate(model_from_checkpoint(ck), vocab, sources, args.input_len, args.max_len, args.batch_size)
    with open(args.out, "w", encoding="utf-8", newline="\n") as fh:
        for p in preds:
            # one prediction per line; embedded newlines would break alignment
            fh.write(p.replace("\r", " ").replace("\n", " ") + "\n")
    write_manifest(args, [args.out], [args.checkpoint, args.vocab, args.input])
    return EXIT_OK


def _weights(text: Optional[str]) -> CodeBleuWeights:
    if not text:
        return CodeBleuWeights()
    try:
        parts = [float(x) for x in text.split(",")]
    except ValueError:
        raise UsageError(f"--weights must be four comma-separated numbers, got {text!r}") from None
    if len(parts) != 4:
        raise UsageError(f"--weights needs 4 values, got {len(parts)}")
    try:
        return CodeBleuWeights(*parts)
    except ValueError as exc:
        raise UsageError(str(exc)) from None


def cmd_evaluate(args) -> int:
    report = evaluate_file(args.pred, args.ref, _weights(args.weights), args.keyword_weight)
    if args.out:
        _write_json(args.out, report.as_dict())
        write_manifest(args, [args.out], [args.pred, args.ref])
    print(report.table(args.name))
    comps = ", ".join(f"{k}={'absent' if v is None else f'{v:.4f}'}" for k, v in report.components.items())
    print(f"components: {comps}")
    print(f"samples={report.n_samples} parse_failures={report.n_parse_failures} lex_failures={report.n_lex_failures}")
    return EXIT_OK


def cmd_grid(args) -> int:
    with open(args.grid, encoding="utf-8") as fh:
        grid_file = json.load(fh)
    base = dict(grid_file.get("base", {}))
    rows = grid_file.get("rows")
    if not isinstance(rows, list) or not rows:
        raise InvalidRunConfig("grid file needs a non-empty 'rows' list")
    configs = [TrainingRunConfig.from_dict({**base, "mode": "finetune", **row}) for row in rows]
    vocab = Vocabulary.load(args.vocab)
    train_pairs = [(s.nl, s.code) for s in load_split(args.train)]
    eval_pairs = [(s.nl, s.code) for s in load_split(args.eval)]
    report = run_grid(configs, eval_pairs, vocab, train_pairs)
    print(report.render())
    if args.out:
        _write_json(args.out, report.as_dict())
        write_manifest(args, [args.out], [args.grid, args.vocab, args.train, args.eval])
    return EXIT_OK


def cmd_report_compare(args) -> int:
    reports = {}
    report_paths = []
    for item in args.report:
        name, sep, path = item.partition("=")
        if not sep:
            raise UsageError(f"--report expects NAME=PATH, got {item!r}")
        if not os.path.isfile(path):
            raise MissingFile(f"no such file: {path}")
        report_paths.append(path)
        with open(path, encoding="utf-8") as fh:
            reports[name] = EvalReport.from_dict(json.load(fh))
    baselines = [] if args.no_baselines else load_baselines(args.baselines)
    try:
        text = compare(reports, baselines, args.delta_from)
    except KeyError as exc:
        raise UsageError(str(exc)) from None
    _emit(text, args.out)
    if args.out:
        write_manifest(args, [args.out], report_paths + ([args.baselines] if args.baselines else []))
    return EXIT_OK


def cmd_debug_ast(args) -> int:
    if args.file:
        with open(args.file, encoding="utf-8") as fh:
            code = fh.read()
    elif args.code is not None:
        code = args.code
    else:
        raise UsageError("give --code or --file")
    tokens = lex(code)
    ast = parse(code)
    out = {
        "tokens": [{"kind": t.kind, "text": t.text, "span": list(t.span)} for t in tokens],
        "ast": ast.pretty(),
        "subtrees": dict(sorted(enumerate_subtrees(ast).items())),
        "dataflow": [str(e) for e in sorted(extract_dataflow(ast).elements())],
    }
    print(json.dumps(out, indent=2, ensure_ascii=False))
    return EXIT_OK


# ------------------------------------------------------------------ parser


def build_parser() -> argparse.ArgumentParser:
    root = _Parser(prog="javagen", description="Text-to-Java generation workbench.")
    root.add_argument("--version", action="version", version=f"javagen {__version__}")
    root.add_argument("--sequential", action="store_true", help="single thread, deterministic kernels")
    sub = root.add_subparsers(dest="command", metavar="SUBCOMMAND", parser_class=_Parser)

    def add(name, handler, help_text):
        p = sub.add_parser(name, help=help_text)
        p.set_defaults(handler=handler)
        return p

    def split_flags(p):
        for split in SPLITS:
            p.add_argument(f"--{split}", help=f"{split} split (jsonl)")

    p = add("corpus-stats", cmd_corpus_stats, "per-split counts and length statistics")
    split_flags(p)
    p.add_argument("--out")

    p = add("clean", cmd_clean, "drop problematic samples and report removals")
    split_flags(p)
    p.add_argument("--rules", help="JSON object of CleaningRules fields")
    p.add_argument("--out-dir", required=True)

    p = add("tokenizer-train", cmd_tokenizer_train, "learn a byte-level BPE vocabulary")
    p.add_argument("--data", nargs="+", required=True)
    p.add_argument("--vocab-size", type=int, default=32128)
    p.add_argument("--out", required=True)

    p = add("seq-lengths", cmd_seq_lengths, "longest encoded nl/code lengths (eos included)")
    p.add_argument("--vocab", required=True)
    p.add_argument("--data", nargs="+", required=True)
    p.add_argument("--out")

    p = add("make-pretrain-shards", cmd_make_pretrain_shards, "materialize span-corrupted pretraining examples")
    p.add_argument("--vocab", required=True)
    p.add_argument("--data", nargs="+", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--input-len", type=int, default=512)
    p.add_argument("--rate", type=float, default=0.15)
    p.add_argument("--mean-span", type=float, default=3.0)
    p.add_argument("--seed", type=int, default=0)

    _add_config_flags(add("pretrain", cmd_pretrain, "denoising pretraining run"))
    _add_config_flags(add("finetune", cmd_finetune, "nl-to-code fine-tuning run"))

    p = add("generate", cmd_generate, "greedy-decode code for each input description")
    p.add_argument("--checkpoint", required=True)
    p.add_argument("--vocab", required=True)
    p.add_argument("--input", required=True, help="record file (uses nl) or one description per line")
    p.add_argument("--out", required=True)
    p.add_argument("--input-len", type=int, default=256)
    p.add_argument("--max-len", type=int, default=256)
    p.add_argument("--batch-size", type=int, default=32)

    p = add("evaluate", cmd_evaluate, "BLEU, EM and CodeBLEU of predictions against references")
    p.add_argument("--pred", required=True)
    p.add_argument("--ref", required=True)
    p.add_argument("--weights", help="alpha,beta,gamma,delta (default 0.25 each)")
    p.add_argument("--keyword-weight", type=float, default=5.0)
    p.add_argument("--name", default="model")
    p.add_argument("--out", help="write the EvalReport as JSON")

    p = add("grid", cmd_grid, "fine-tune and score one row per config")
    p.add_argument("--grid", required=True, help='JSON: {"base": {...}, "rows": [{...}, ...]}')
    p.add_argument("--vocab", required=True)
    p.add_argument("--train", required=True)
    p.add_argument("--eval", required=True)
    p.add_argument("--out")

    p = add("report-compare", cmd_report_compare, "tabulate reports next to published baselines")
    p.add_argument("--report", nargs="+", required=True, metavar="NAME=PATH")
    p.add_argument("--baselines", help="baseline rows JSON (default: bundled table)")
    p.add_argument("--no-baselines", action="store_true")
    p.add_argument("--delta-from", help="row name to show differences against")
    p.add_argument("--out")

    p = add("debug-ast", cmd_debug_ast, "dump tokens, AST, subtree signatures and def-use edges")
    p.add_argument("--code")
    p.add_argument("--file")
    return root


def run(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if not getattr(args, "handler", None):
            raise UsageError(f"missing subcommand\n{parser.format_usage().strip()}")
        if args.sequential:
            set_sequential()
        return args.handler(args)
    except UsageError as exc:
        sys.stderr.write(str(exc).split("\n", 1)[-1] + "\n")
        return _fail("UsageError", EXIT_USAGE, str(exc).split("\n", 1)[0])
    except USAGE_ERRORS as exc:
        return _fail(type(exc).__name__, EXIT_USAGE, str(exc))
    except (JavaSyntaxError, LexError) as exc:
        return _fail(type(exc).__name__, EXIT_DATA, str(exc))
    except DATA_ERRORS as exc:
        return _fail(type(exc).__name__, EXIT_DATA, str(exc))
    except Exception as exc:  # noqa: BLE001 - last-resort mapping to the runtime exit code
        return _fail(type(exc).__name__, EXIT_RUNTIME, str(exc))


def main() -> None:
    sys.exit(run())


if __name__ == "__main__":
    main()
