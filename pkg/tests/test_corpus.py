import json

import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from javagen.corpus import (
    CleaningRules,
    MalformedLine,
    MissingFile,
    Sample,
    build_pretraining_pool,
    clean,
    clean_dataset,
    load_split,
    stats,
    write_split,
)
from javagen.java import LexError, lex


def _write_lines(path, lines):
    path.write_bytes(b"".join(line + b"\n" for line in lines))
    return path


def _record(nl, code):
    return json.dumps({"nl": nl, "code": code}).encode()


def test_three_lines_keep_order(tmp_path):
    p = _write_lines(tmp_path / "t.jsonl", [_record(f"n{i}", f"c{i};") for i in range(3)])
    got = load_split(p)
    assert [s.id for s in got] == [0, 1, 2]
    assert [s.code for s in got] == ["c0;", "c1;", "c2;"]


def test_empty_file(tmp_path):
    p = tmp_path / "e.jsonl"
    p.write_bytes(b"")
    assert load_split(p) == []


def test_truncated_second_line(tmp_path):
    p = _write_lines(tmp_path / "t.jsonl", [_record("a", "b"), b'{"nl": "a", "co'])
    with pytest.raises(MalformedLine) as err:
        load_split(p)
    assert err.value.line_number == 2


@pytest.mark.parametrize(
    "line", [b'{"nl": "a"}', b'{"nl": "a", "code": "b", "x": 1}', b'{"nl": 1, "code": "b"}', b"[1, 2]"]
)
def test_wrong_shape_records(tmp_path, line):
    with pytest.raises(MalformedLine):
        load_split(_write_lines(tmp_path / "t.jsonl", [line]))


def test_missing_file(tmp_path):
    with pytest.raises(MissingFile):
        load_split(tmp_path / "nope.jsonl")


def test_unknown_split_name(tmp_path):
    with pytest.raises(ValueError):
        load_split(tmp_path / "x", "dev")


_texts = st.text(alphabet=st.characters(blacklist_categories=("Cs",)), max_size=30)


@settings(suppress_health_check=[HealthCheck.function_scoped_fixture], max_examples=50)
@given(st.lists(st.tuples(_texts, _texts), max_size=10))
def test_write_then_load_round_trips(tmp_path, pairs):
    path = tmp_path / "rt.jsonl"
    write_split([Sample(i, nl, code) for i, (nl, code) in enumerate(pairs)], path)
    assert [(s.nl, s.code) for s in load_split(path)] == pairs


def test_invalid_utf8_is_flagged_and_cleaned(tmp_path):
    p = _write_lines(tmp_path / "t.jsonl", [_record("ok", "x;"), b'{"nl": "bad \xff", "code": "y;"}'])
    got = load_split(p)
    assert [s.bad_bytes for s in got] == [False, True]
    kept, report = clean(got)
    assert [s.code for s in kept] == ["x;"]
    assert report.removal_reasons == {"invalid_utf8": 1}


def test_ten_samples_two_lex_failures():
    codes = ["int a;", '"open', "b++;", "c = d;", "#", "return 1;", "e();", "f g;", "h;", "i = 0;"]
    samples = [Sample(i, "nl", c) for i, c in enumerate(codes)]

    def lexes(code):
        try:
            lex(code)
            return True
        except LexError:
            return False

    oracle = sum(not lexes(c) for c in codes)
    kept, report = clean(samples)
    assert oracle == 2
    assert len(kept) == 8
    assert report.removal_reasons == {"lex_failure": 2}


def test_all_valid_is_untouched(samples):
    kept, report = clean(samples)
    assert kept == list(samples)
    assert report.removal_reasons == {} and report.removed_per_split == {"train": 0}


def test_first_failing_rule_wins():
    s = Sample(0, "", "x" * 20, bad_bytes=True)
    _, report = clean([s], CleaningRules(max_code_chars=10))
    assert report.removal_reasons == {"invalid_utf8": 1}


def test_rules_are_individually_switchable():
    samples = [Sample(0, "", "   "), Sample(1, "", '"open')]
    kept, _ = clean(samples, CleaningRules(empty_code=False, lex_failure=False))
    assert len(kept) == 2
    with pytest.raises(ValueError):
        CleaningRules.from_dict({"nonsense": True})


def test_ids_are_contiguous_per_split_after_cleaning():
    data = {
        "train": [Sample(0, "", "a;", "train"), Sample(1, "", "", "train"), Sample(2, "", "b;", "train")],
        "test": [Sample(0, "", "", "test"), Sample(1, "", "c;", "test")],
    }
    out, _ = clean_dataset(data)
    assert [s.id for s in out["train"]] == [0, 1]
    assert [s.id for s in out["test"]] == [0]


_sample_codes = st.sampled_from(["a;", "", "  ", '"x', "int y = 2;", "#", "f();"])


@given(st.lists(st.tuples(st.sampled_from(["train", "valid", "test"]), _sample_codes), max_size=40))
def test_conservation_and_idempotence(items):
    samples = [Sample(i, "", code, split) for i, (split, code) in enumerate(items)]
    kept, report = clean(samples)
    assert report.retained_total == report.original_total - sum(report.removed_per_split.values())
    assert sum(report.removal_reasons.values()) == sum(report.removed_per_split.values())
    kept2, report2 = clean(kept)
    assert len(kept2) == len(kept) and sum(report2.removed_per_split.values()) == 0
    assert all(s.code.strip() for s in kept)


def test_published_cleaning_arithmetic():
    sizes = {"train": 812008, "valid": 40468, "test": 51210}
    removed = {"train": 2974, "valid": 235, "test": 161}
    retained = sum(sizes.values()) - sum(removed.values())
    assert retained == 900316


def test_stats_counts_scaled_fixture():
    data = {
        "train": [Sample(i, "n", "c;") for i in range(100)],
        "valid": [Sample(i, "n", "c;", "valid") for i in range(2)],
        "test": [Sample(i, "n", "c;", "test") for i in range(2)],
    }
    st_ = stats(data)
    assert st_.counts == {"train": 100, "valid": 2, "test": 2}
    assert st_.total == 104


def test_stats_empty_dataset():
    st_ = stats({})
    assert st_.counts == {"train": 0, "valid": 0, "test": 0}
    assert all(v is None for v in st_.nl_length.values())
    assert all(v is None for v in st_.code_length.values())


def test_stats_single_sample_means():
    st_ = stats({"train": [Sample(0, "a", "bc")]})
    assert st_.nl_length["train"].mean == 1.0
    assert st_.code_length["train"].mean == 2.0


def test_pool_order_train_valid_test():
    data = {
        "test": [Sample(0, "n", "t0", "test")],
        "valid": [Sample(0, "n", "v0", "valid")],
        "train": [Sample(0, "n", "a0"), Sample(1, "n", "a1")],
    }
    assert build_pretraining_pool(data) == ["a0", "a1", "v0", "t0"]


def test_pool_of_empty_splits():
    assert build_pretraining_pool({"train": [], "valid": [], "test": []}) == []


def test_pool_of_scaled_cleaned_fixture():
    data = {
        "train": [Sample(i, "", f"x{i};") for i in range(809)],
        "valid": [Sample(i, "", f"y{i};", "valid") for i in range(40)],
        "test": [Sample(i, "", f"z{i};", "test") for i in range(51)],
    }
    assert len(build_pretraining_pool(data)) == 809 + 40 + 51 == 900
