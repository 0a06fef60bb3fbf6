import json
import subprocess
import sys

import pytest

from javagen.cli import run
from javagen.tokenizer import Vocabulary, max_pair_length
from javagen.corpus import load_split

TINY = json.dumps({"num_layers": 1, "d_model": 32, "num_heads": 2, "d_ff": 64})


def error_line(capsys):
    err = capsys.readouterr().err.strip().splitlines()
    return json.loads(err[-1]), err


@pytest.fixture(scope="module")
def workdir(tmp_path_factory, fixture_path):
    d = tmp_path_factory.mktemp("cli")
    samples = load_split(fixture_path)
    train = d / "train.jsonl"
    evals = d / "eval.jsonl"
    train.write_text("".join(json.dumps({"nl": s.nl, "code": s.code}) + "\n" for s in samples[:40]))
    evals.write_text("".join(json.dumps({"nl": s.nl, "code": s.code}) + "\n" for s in samples[:4]))
    assert run(["tokenizer-train", "--data", str(train), "--vocab-size", "420", "--out", str(d / "vocab.txt")]) == 0
    return d


def _finetune(workdir, out, *extra):
    return run(
        ["--sequential", "finetune", "--vocab-path", str(workdir / "vocab.txt"), "--data-paths",
         str(workdir / "train.jsonl"), "--steps", "3", "--batch-size", "4", "--input-len", "24",
         "--target-len", "32", "--model-overrides", TINY, "--out", str(out), *extra]
    )


# -------------------------------------------------------------- exit codes


def test_unknown_subcommand_is_usage_error(capsys):
    assert run(["frobnicate"]) == 2
    payload, lines = error_line(capsys)
    assert payload["exit_code"] == 2 and payload["error"] == "UsageError"
    assert any(line.startswith("usage:") for line in lines)


def test_missing_subcommand(capsys):
    assert run([]) == 2
    assert error_line(capsys)[0]["exit_code"] == 2


def test_bad_config_value_is_usage_error(workdir, tmp_path, capsys):
    assert _finetune(workdir, tmp_path / "x.ckpt", "--steps", "-5") == 2
    payload, _ = error_line(capsys)
    assert payload["error"] == "InvalidRunConfig"


def test_vocab_too_small_is_usage_error(workdir, tmp_path, capsys):
    code = run(["tokenizer-train", "--data", str(workdir / "train.jsonl"), "--vocab-size", "300",
                "--out", str(tmp_path / "v.txt")])
    assert code == 2
    assert error_line(capsys)[0]["error"] == "VocabTooSmall"


def test_missing_file_is_data_error(tmp_path, capsys):
    assert run(["corpus-stats", "--train", str(tmp_path / "none.jsonl")]) == 3
    assert error_line(capsys)[0]["error"] == "MissingFile"


def test_malformed_line_is_data_error(tmp_path, capsys):
    bad = tmp_path / "bad.jsonl"
    bad.write_text('{"nl": "a", "code": "b"}\n{"nl": \n')
    assert run(["corpus-stats", "--train", str(bad)]) == 3
    payload, _ = error_line(capsys)
    assert payload["error"] == "MalformedLine" and "2" in payload["message"]


def test_length_mismatch_is_data_error(tmp_path, capsys):
    (tmp_path / "p.txt").write_text("a;\n")
    (tmp_path / "r.txt").write_text("a;\nb;\n")
    assert run(["evaluate", "--pred", str(tmp_path / "p.txt"), "--ref", str(tmp_path / "r.txt")]) == 3
    assert error_line(capsys)[0]["error"] == "LengthMismatch"


def test_corrupt_checkpoint_is_data_error(workdir, tmp_path, capsys):
    (tmp_path / "c.ckpt").write_bytes(b"JGCKPT\0\0" + b"\0" * 64)
    code = run(["generate", "--checkpoint", str(tmp_path / "c.ckpt"), "--vocab", str(workdir / "vocab.txt"),
                "--input", str(workdir / "eval.jsonl"), "--out", str(tmp_path / "o.txt")])
    assert code == 3
    assert error_line(capsys)[0]["error"] == "CorruptCheckpoint"


def test_unparseable_code_is_data_error(capsys):
    assert run(["debug-ast", "--code", "int f( {"]) == 3
    assert error_line(capsys)[0]["error"] == "JavaSyntaxError"


def test_io_failure_is_runtime_error(tmp_path, capsys):
    (tmp_path / "p.txt").write_text("a;\n")
    out_dir = tmp_path / "taken"
    out_dir.mkdir()
    code = run(["evaluate", "--pred", str(tmp_path / "p.txt"), "--ref", str(tmp_path / "p.txt"), "--out", str(out_dir)])
    assert code == 4
    assert error_line(capsys)[0]["exit_code"] == 4


def test_bad_weights_is_usage_error(tmp_path, capsys):
    (tmp_path / "p.txt").write_text("a;\n")
    p = str(tmp_path / "p.txt")
    assert run(["evaluate", "--pred", p, "--ref", p, "--weights", "1,2"]) == 2
    assert run(["evaluate", "--pred", p, "--ref", p, "--weights", "0,0,0,0"]) == 2


def test_entry_point_process():
    proc = subprocess.run([sys.executable, "-m", "javagen.cli", "debug-ast", "--code", "int b=a;"],
                          capture_output=True, text=True, check=False)
    assert proc.returncode == 0
    out = json.loads(proc.stdout)
    assert out["dataflow"] == ["(v0 computed_from v1)"]
    assert [t["text"] for t in out["tokens"]] == ["int", "b", "=", "a", ";"]
    proc = subprocess.run([sys.executable, "-m", "javagen.cli", "nope"], capture_output=True, text=True, check=False)
    assert proc.returncode == 2


# ------------------------------------------------------------- subcommands


def test_evaluate_gold(fixture_path, tmp_path, capsys):
    codes = [s.code for s in load_split(fixture_path)]
    (tmp_path / "pred.txt").write_text("".join(c + "\n" for c in codes))
    out = tmp_path / "report.json"
    assert run(["evaluate", "--pred", str(tmp_path / "pred.txt"), "--ref", fixture_path, "--out", str(out)]) == 0
    report = json.loads(out.read_text())
    assert round(report["bleu"], 6) == round(report["codebleu"], 6) == report["em"] == 100.0
    assert "| model" in capsys.readouterr().out
    manifest = json.loads((tmp_path / "report.json.manifest.json").read_text())
    assert manifest["subcommand"] == "evaluate"
    assert set(manifest["inputs"]) == {str(tmp_path / "pred.txt"), fixture_path}


def test_seq_lengths_matches_library(workdir, capsys):
    assert run(["seq-lengths", "--vocab", str(workdir / "vocab.txt"), "--data", str(workdir / "train.jsonl")]) == 0
    got = json.loads(capsys.readouterr().out)
    vocab = Vocabulary.load(workdir / "vocab.txt")
    samples = load_split(workdir / "train.jsonl")
    assert got["max_target_len"] == max(len(vocab.encode(s.code)) + 1 for s in samples)
    assert got == json.loads(json.dumps(max_pair_length(vocab, samples).as_dict(), sort_keys=True))


def test_corpus_stats(workdir, capsys):
    assert run(["corpus-stats", "--train", str(workdir / "train.jsonl"), "--test", str(workdir / "eval.jsonl")]) == 0
    got = json.loads(capsys.readouterr().out)
    assert got["counts"]["train"] == 40 and got["counts"]["test"] == 4


def test_file_outputs_get_manifests(workdir, tmp_path, capsys):
    vocab, train = str(workdir / "vocab.txt"), str(workdir / "train.jsonl")
    assert run(["corpus-stats", "--train", train, "--out", str(tmp_path / "s.json")]) == 0
    assert run(["seq-lengths", "--vocab", vocab, "--data", train, "--out", str(tmp_path / "l.json")]) == 0
    (tmp_path / "p.txt").write_text("a;\n")
    assert run(["evaluate", "--pred", str(tmp_path / "p.txt"), "--ref", str(tmp_path / "p.txt"),
                "--out", str(tmp_path / "r.json")]) == 0
    assert run(["report-compare", "--report", f"x={tmp_path / 'r.json'}", "--out", str(tmp_path / "t.md")]) == 0
    for name in ("s.json", "l.json", "r.json", "t.md"):
        manifest = json.loads((tmp_path / f"{name}.manifest.json").read_text())
        assert manifest["outputs"] == {str(tmp_path / name): manifest["outputs"][str(tmp_path / name)]}
        assert manifest["inputs"]


def test_clean(tmp_path, capsys):
    src = tmp_path / "t.jsonl"
    src.write_text('{"nl": "a", "code": "x;"}\n{"nl": "b", "code": "\\"open"}\n{"nl": "c", "code": ""}\n')
    out = tmp_path / "clean"
    assert run(["clean", "--train", str(src), "--out-dir", str(out)]) == 0
    report = json.loads((out / "cleaning_report.json").read_text())
    assert report["retained_total"] == 1
    assert report["retained_total"] == report["original_total"] - sum(report["removed_per_split"].values())
    assert len(load_split(out / "train.jsonl")) == 1
    assert (out / "manifest.json").is_file()


def test_clean_rules_file(tmp_path, capsys):
    src = tmp_path / "t.jsonl"
    src.write_text('{"nl": "a", "code": "\\"open"}\n')
    rules = tmp_path / "rules.json"
    rules.write_text('{"lex_failure": false}')
    assert run(["clean", "--train", str(src), "--rules", str(rules), "--out-dir", str(tmp_path / "o")]) == 0
    rules.write_text('{"no_such_rule": true}')
    assert run(["clean", "--train", str(src), "--rules", str(rules), "--out-dir", str(tmp_path / "o")]) == 2


def test_shards_pretrain_finetune_generate(workdir, tmp_path, capsys):
    shard = tmp_path / "p.shard"
    vocab = str(workdir / "vocab.txt")
    assert run(["make-pretrain-shards", "--vocab", vocab, "--data", str(workdir / "train.jsonl"),
                "--input-len", "24", "--out", str(shard)]) == 0
    pre = tmp_path / "pre.ckpt"
    assert run(["--sequential", "pretrain", "--vocab-path", vocab, "--data-paths", str(shard), "--steps", "2",
                "--batch-size", "4", "--input-len", "24", "--target-len", "32", "--model-overrides", TINY,
                "--out", str(pre)]) == 0
    tuned = tmp_path / "ft.ckpt"
    assert _finetune(workdir, tuned, "--init-checkpoint", str(pre)) == 0
    summary = json.loads(capsys.readouterr().out.strip().splitlines()[-1])
    assert summary["step"] == 3
    preds = tmp_path / "preds.txt"
    assert run(["generate", "--checkpoint", str(tuned), "--vocab", vocab, "--input", str(workdir / "eval.jsonl"),
                "--out", str(preds), "--input-len", "24", "--max-len", "8"]) == 0
    assert len(preds.read_text().split("\n")) == 5  # 4 lines plus the final newline
    assert run(["evaluate", "--pred", str(preds), "--ref", str(workdir / "eval.jsonl")]) == 0


def test_config_file_and_flag_override(workdir, tmp_path, capsys):
    cfg = tmp_path / "run.json"
    cfg.write_text(json.dumps({"steps": 50, "seed": 4}))
    out = tmp_path / "a.ckpt"
    assert _finetune(workdir, out, "--config", str(cfg)) == 0
    manifest = json.loads((tmp_path / "a.ckpt.manifest.json").read_text())
    assert manifest["config"]["steps"] == 3 and manifest["seed"] == 4
    cfg.write_text(json.dumps({"mode": "pretrain"}))
    assert _finetune(workdir, out, "--config", str(cfg)) == 2


def test_sequential_reruns_are_byte_identical(workdir, tmp_path, capsys):
    out = tmp_path / "same.ckpt"
    blobs = []
    for _ in range(2):
        assert _finetune(workdir, out) == 0
        blobs.append((out.read_bytes(), (tmp_path / "same.ckpt.manifest.json").read_bytes()))
    assert blobs[0] == blobs[1]
    vocab_out = tmp_path / "v.txt"
    texts = []
    for _ in range(2):
        assert run(["tokenizer-train", "--data", str(workdir / "train.jsonl"), "--vocab-size", "400",
                    "--out", str(vocab_out)]) == 0
        texts.append(vocab_out.read_bytes())
    assert texts[0] == texts[1]


def test_generate_rejects_foreign_vocabulary(workdir, tmp_path, capsys):
    ck = tmp_path / "a.ckpt"
    assert _finetune(workdir, ck) == 0
    other = tmp_path / "other.txt"
    assert run(["tokenizer-train", "--data", str(workdir / "eval.jsonl"), "--vocab-size", "420",
                "--out", str(other)]) == 0
    capsys.readouterr()
    code = run(["generate", "--checkpoint", str(ck), "--vocab", str(other), "--input", str(workdir / "eval.jsonl"),
                "--out", str(tmp_path / "o.txt")])
    assert code == 3
    assert error_line(capsys)[0]["error"] == "VocabMismatch"


def test_grid(workdir, tmp_path, capsys):
    grid = tmp_path / "grid.json"
    base = {"steps": 2, "batch_size": 4, "input_len": 24, "model_overrides": json.loads(TINY)}
    grid.write_text(json.dumps({"base": base, "rows": [{"target_len": 4}, {"target_len": 64}]}))
    out = tmp_path / "grid_out.json"
    assert run(["--sequential", "grid", "--grid", str(grid), "--vocab", str(workdir / "vocab.txt"),
                "--train", str(workdir / "train.jsonl"), "--eval", str(workdir / "eval.jsonl"),
                "--out", str(out)]) == 0
    rows = json.loads(out.read_text())["rows"]
    assert [r["target_len"] for r in rows] == [4, 64]
    assert rows[0]["samples_truncated"] == 4 and rows[0]["em_truncated"] == 0.0
    assert "input / target length" in capsys.readouterr().out


def test_grid_without_rows(workdir, tmp_path, capsys):
    grid = tmp_path / "g.json"
    grid.write_text('{"base": {}}')
    assert run(["grid", "--grid", str(grid), "--vocab", str(workdir / "vocab.txt"), "--train",
                str(workdir / "train.jsonl"), "--eval", str(workdir / "eval.jsonl")]) == 2


def test_report_compare(tmp_path, capsys):
    (tmp_path / "p.txt").write_text("return x;\n")
    assert run(["evaluate", "--pred", str(tmp_path / "p.txt"), "--ref", str(tmp_path / "p.txt"),
                "--out", str(tmp_path / "r.json")]) == 0
    capsys.readouterr()
    assert run(["report-compare", "--report", f"ours={tmp_path / 'r.json'}", "--delta-from", "CoTexT-1CC"]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert len(lines) == 2 + 11 + 1
    assert lines[-1].startswith("| ours") and "+62.60" in lines[-1]
    assert run(["report-compare", "--report", f"ours={tmp_path / 'r.json'}", "--no-baselines",
                "--delta-from", "missing"]) == 2
    assert run(["report-compare", "--report", "no-equals-sign"]) == 2


def test_debug_ast_from_file(tmp_path, capsys):
    (tmp_path / "c.java").write_text("int a=1; int b=a;")
    assert run(["debug-ast", "--file", str(tmp_path / "c.java")]) == 0
    out = json.loads(capsys.readouterr().out)
    assert out["dataflow"] == ["(v1 computed_from v0)"]
    assert sum(out["subtrees"].values()) > 0


def test_version(capsys):
    with pytest.raises(SystemExit) as exc:
        run(["--version"])
    assert exc.value.code == 0
    assert "javagen" in capsys.readouterr().out
