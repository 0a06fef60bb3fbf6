import json
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from javagen.corpus import MissingFile
from javagen.metrics import (
    CodeBleuWeights,
    LengthMismatch,
    ast_match,
    codebleu,
    combine,
    compare,
    corpus_bleu,
    dataflow_match,
    evaluate,
    evaluate_file,
    exact_match,
    exact_match_detail,
    load_baselines,
    read_references,
    tokenize_code,
    weighted_ngram_match,
)
from javagen.metrics.report import render_table

from oracles import HAND_PAIRS, brute_bleu, hand_scores, random_instance


# -------------------------------------------------------------------- BLEU


def test_identical_is_100():
    toks = [["int", "x", "=", "1", ";"], ["return", "x", ";"]]
    assert corpus_bleu(toks, toks) == pytest.approx(100.0, abs=1e-9)


def test_unigram_clipping_example():
    assert round(corpus_bleu([["a", "b", "b"]], [["a", "b"]], max_n=1), 2) == 66.67


def test_matches_brute_force_on_random_instances():
    rng = random.Random(2024)
    for _ in range(1000):
        cands, refs = random_instance(rng, rng.randint(1, 4))
        assert abs(corpus_bleu(cands, refs) - brute_bleu(cands, refs)) < 1e-9


def test_multi_reference_matches_brute_force():
    rng = random.Random(5)
    for _ in range(300):
        cands, refs = random_instance(rng, rng.randint(1, 3), max_refs=3)
        assert abs(corpus_bleu(cands, refs) - brute_bleu(cands, refs)) < 1e-9


def test_brevity_penalty_picks_shorter_reference_on_tie():
    # candidate length 3, references 2 and 4 are equally close; 2 wins so BP = 1
    cand = [["a", "b", "c"]]
    assert corpus_bleu(cand, [[["a", "b"], ["a", "b", "c", "d"]]], max_n=1) == pytest.approx(100.0)


def test_bleu_length_mismatch():
    with pytest.raises(LengthMismatch):
        corpus_bleu([["a"]], [])


def test_all_empty_candidates_score_zero():
    assert corpus_bleu([[], []], [["a"], ["b"]]) == 0.0


def test_bleu_ignores_whitespace_and_comments():
    ref = [tokenize_code("int x = 1 ;")]
    assert corpus_bleu([tokenize_code("int   x=1;")], ref) == pytest.approx(100.0)
    assert tokenize_code("int x = 1 ; // done") == tokenize_code("int x = 1 ;")


# ---------------------------------------------------------------------- EM


def test_em_examples():
    assert exact_match(["a;", "b;"], ["a;", "b;"]) == 100.0
    assert exact_match(["x;", "y;"], ["x;", "z;"]) == 50.0
    assert exact_match(["int  x=1;"], ["int x=1;"]) == 100.0


def test_em_any_reference():
    assert exact_match(["b;"], [["a;", "b;"]]) == 100.0


def test_em_records_lex_failures():
    d = exact_match_detail(['"open', "a;"], ["a;", "a;"])
    assert d.matches == [False, True]
    assert d.lex_failures == [0]


@settings(max_examples=100, deadline=None)
@given(st.data())
def test_em_invariant_under_layout_and_comments(codes, data):
    code = data.draw(st.sampled_from(codes))
    from javagen.java import lex

    seps = st.sampled_from([" ", "  ", "\n", "\t", " /* c */ ", " // c\n"])
    pieces = [t.text for t in lex(code)]
    noisy = "".join(p + data.draw(seps) for p in pieces)
    assert exact_match([noisy], [code]) == 100.0


def test_strict_prefix_never_matches(codes):
    from javagen.java import lex

    cands, refs = [], []
    for code in codes:
        toks = [t.text for t in lex(code)]
        cut = len(toks) // 2
        cands.append(" ".join(toks[:cut]))
        refs.append(code)
    assert exact_match(cands, refs) == 0.0


@settings(max_examples=60, deadline=None)
@given(st.data())
def test_truncated_candidates_have_zero_em(codes, data):
    from javagen.java import lex

    chosen = data.draw(st.lists(st.sampled_from(codes), min_size=1, max_size=6))
    cands = []
    for code in chosen:
        toks = [t.text for t in lex(code)]
        cands.append(" ".join(toks[: data.draw(st.integers(0, len(toks) - 1))]))
    assert exact_match(cands, chosen) == 0.0


# ---------------------------------------------------------- weighted n-gram


def test_weighted_identical_is_one():
    toks = [tokenize_code("if ( a ) return b ;")]
    assert weighted_ngram_match(toks, toks) == pytest.approx(1.0)


def test_keyword_divergence_costs_more_than_identifier_divergence():
    ref = [tokenize_code("return a ;")]
    kw = weighted_ngram_match([tokenize_code("throw a ;")], ref)
    ident = weighted_ngram_match([tokenize_code("return b ;")], ref)
    assert kw < ident


def test_weighted_hand_case():
    # ref "return a ;" vs cand "throw a ;": unigrams throw(5,miss) a ; -> 2/7,
    # bigrams "throw a"(5,miss) "a ;" -> 1/6, trigram (5,miss) -> smoothed 1/10
    got = weighted_ngram_match([["throw", "a", ";"]], [["return", "a", ";"]], max_n=3)
    assert got == pytest.approx((2 / 7 * 1 / 6 * 1 / 10) ** (1 / 3), rel=1e-12)


def test_keyword_ratio_one_equals_bleu():
    rng = random.Random(1)
    for _ in range(50):
        cands, refs = random_instance(rng, 3)
        assert weighted_ngram_match(cands, refs, keyword_weight_ratio=1.0) * 100 == pytest.approx(
            corpus_bleu(cands, refs), abs=1e-9)


# ------------------------------------------------------------- structural


def test_ast_examples():
    assert ast_match("int x=1;", "int x=1;") == 1.0
    assert ast_match("int f( {", "int x=1;") == 0.0
    # reference: 2 declarations, 2 "(type int)", 2 declarators, 2 literals = 8;
    # the candidate supplies its declaration, one type, x's declarator and literal 1 = 4
    assert ast_match("int x=1;", "int x=1; int y=2;") == pytest.approx(0.5)


def test_ast_unparseable_reference_is_absent():
    assert ast_match("int x=1;", "int f( {") is None


def test_dataflow_examples():
    assert dataflow_match("int a=1; int b=a;", "int a=1; int b=a;") == 1.0
    assert dataflow_match("return 1;", "return 1;") is None
    assert dataflow_match("int b=a;", "int b=c;") == 1.0
    assert dataflow_match("int f( {", "int b=a;") == 0.0


# ---------------------------------------------------------------- CodeBLEU


def test_combine_examples():
    assert combine({"ngram": 1, "weighted_ngram": 1, "ast": 1, "dataflow": 1}) == 100.0
    assert combine({"ngram": 1, "weighted_ngram": 1, "ast": 0, "dataflow": 0}) == 50.0


def test_absent_dataflow_renormalizes():
    assert combine({"ngram": 1, "weighted_ngram": 1, "ast": 0, "dataflow": None}) == pytest.approx(200 / 3)


def test_weights_validation():
    with pytest.raises(ValueError):
        CodeBleuWeights(-1, 1, 1, 1)
    with pytest.raises(ValueError):
        CodeBleuWeights(0, 0, 0, 0)


@settings(max_examples=60, deadline=None)
@given(st.data())
def test_bleu_only_weights_reduce_to_bleu(codes, data):
    cands = data.draw(st.lists(st.sampled_from(codes + ["", "x ;", "return"]), min_size=1, max_size=5))
    refs = data.draw(st.lists(st.sampled_from(codes), min_size=len(cands), max_size=len(cands)))
    got = codebleu(cands, refs, CodeBleuWeights(1, 0, 0, 0)).score
    want = corpus_bleu([tokenize_code(c) for c in cands], [tokenize_code(r) for r in refs])
    assert abs(got - want) < 1e-9


@settings(max_examples=60, deadline=None)
@given(st.data())
def test_scores_are_bounded(codes, data):
    cands = data.draw(st.lists(st.sampled_from(codes + ["", "int f( {", "x ;"]), min_size=1, max_size=5))
    refs = data.draw(st.lists(st.sampled_from(codes + ["return 1 ;"]), min_size=len(cands), max_size=len(cands)))
    r = evaluate(cands, refs)
    for v in (r.bleu, r.em, r.codebleu):
        assert 0.0 <= v <= 100.0
    for v in r.components.values():
        assert v is None or 0.0 <= v <= 1.0
    assert r.codebleu == pytest.approx(combine(r.components), abs=1e-9)


def test_perfect_candidates_on_fixture(codes):
    r = evaluate(codes, codes)
    assert (r.bleu, r.em, r.codebleu) == (pytest.approx(100.0), 100.0, pytest.approx(100.0))
    assert all(v == pytest.approx(1.0) for v in r.components.values())
    assert r.n_parse_failures == 0


# ------------------------------------------------------------ file-level


def _write(path, lines):
    path.write_text("".join(line + "\n" for line in lines), encoding="utf-8")
    return path


def test_hand_scored_five_pairs(tmp_path):
    refs = _write(tmp_path / "ref.txt", [r for r, _ in HAND_PAIRS])
    preds = _write(tmp_path / "pred.txt", [p for _, p in HAND_PAIRS])
    report = evaluate_file(preds, refs)
    want = hand_scores()
    assert report.bleu == pytest.approx(want["bleu"], rel=1e-12)
    assert report.em == want["em"]
    assert report.codebleu == pytest.approx(want["codebleu"], rel=1e-12)
    for k, v in want["components"].items():
        assert report.components[k] == pytest.approx(v, rel=1e-12)
    assert report.n_samples == 5


def test_copied_predictions_score_100(tmp_path, fixture_path, codes):
    preds = _write(tmp_path / "pred.txt", codes)
    r = evaluate_file(preds, fixture_path)
    assert (round(r.bleu, 9), r.em, round(r.codebleu, 9)) == (100.0, 100.0, 100.0)
    assert set(r.fingerprints) == {"predictions", "references"}


def test_empty_prediction_lines_are_counted(tmp_path):
    refs = _write(tmp_path / "ref.txt", ["return x;", "return y;"])
    preds = _write(tmp_path / "pred.txt", ["return x;", ""])
    r = evaluate_file(preds, refs)
    assert r.n_samples == 2
    assert r.em == 50.0
    assert r.bleu < 100.0


def test_length_mismatch_and_missing(tmp_path):
    refs = _write(tmp_path / "ref.txt", ["a;", "b;"])
    preds = _write(tmp_path / "pred.txt", ["a;"])
    with pytest.raises(LengthMismatch):
        evaluate_file(preds, refs)
    with pytest.raises(MissingFile):
        evaluate_file(tmp_path / "nope.txt", refs)


def test_reference_format_detection(tmp_path):
    records = _write(tmp_path / "r.jsonl", [json.dumps({"nl": "n", "code": "a ;"}), json.dumps({"nl": "m", "code": "b ;"})])
    plain = _write(tmp_path / "r.txt", ["a ;", "b ;"])
    assert read_references(records) == read_references(plain) == ["a ;", "b ;"]


def test_report_json_round_trip(tmp_path):
    r = evaluate(["a;"], ["a;"])
    from javagen.metrics import EvalReport

    assert EvalReport.from_dict(json.loads(r.to_json())) == r


# ---------------------------------------------------------------- tables


def test_bundled_baselines_match_published_rows():
    rows = {name: scores for name, *scores in load_baselines()}
    assert len(rows) == 11
    assert rows["CoTexT-1CC"] == [37.40, 20.10, 40.14]
    assert rows["JavaPT-B-1CC-PL"] == [38.65, 21.85, 41.19]
    assert rows["JavaPT-B-2CC-PL"] == [39.07, 22.15, 41.53]
    assert rows["JavaPT-L-2CC-PL"] == [39.87, 22.45, 42.49]
    assert rows["CodeGPT-adapted"] == [32.79, 20.10, 35.98]
    assert list(rows)[0].startswith("Guo") and list(rows)[-1] == "JavaPT-L-2CC-PL"


def test_table_column_order_and_rows():
    r = evaluate(["a;"], ["a;"])
    text = compare({"ours": r}, [("base", 10.0, 5.0, 12.0)], delta_from="base")
    lines = text.splitlines()
    assert [c.strip() for c in lines[0].strip("|").split("|")] == [
        "Model", "BLEU", "EM", "CodeBLEU", "dBLEU", "dEM", "dCodeBLEU"]
    assert lines[2].startswith("| base")
    assert "+90.00" in lines[3] and "+95.00" in lines[3] and "+88.00" in lines[3]


def test_unknown_delta_row():
    with pytest.raises(KeyError):
        render_table([("a", 1.0, 2.0, 3.0)], delta_from="b")
