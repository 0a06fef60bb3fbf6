import pytest
from hypothesis import given
from hypothesis import strategies as st

from javagen.java import LexError, lex, lexemes


def kinds(text):
    return [(t.kind, t.text) for t in lex(text)]


def test_hand_lexed_return_statement():
    assert kinds("return a+b;") == [
        ("keyword", "return"),
        ("identifier", "a"),
        ("operator", "+"),
        ("identifier", "b"),
        ("separator", ";"),
    ]


def test_empty_input():
    assert lex("") == []


def test_unterminated_string_reports_its_start():
    with pytest.raises(LexError) as err:
        lex('"unterminated')
    assert err.value.offset == 0


@pytest.mark.parametrize("text, offset", [("x = 'a", 4), ("a /* never closed", 2), ("int #x;", 4)])
def test_other_lex_errors(text, offset):
    with pytest.raises(LexError) as err:
        lex(text)
    assert err.value.offset == offset


def test_comments_and_whitespace_are_dropped():
    assert lexemes("a /* c */ + // tail\n b") == ["a", "+", "b"]


def test_maximal_munch():
    assert lexemes("x>>>=2") == ["x", ">>>=", "2"]
    assert lexemes("a-->b") == ["a", "--", ">", "b"]
    assert lexemes("f(int... xs)") == ["f", "(", "int", "...", "xs", ")"]


def test_literal_words_and_numbers():
    assert kinds("true null 0x1F 3.5e-2f 'c' \"s\\\"t\"") == [
        ("literal", "true"),
        ("literal", "null"),
        ("literal", "0x1F"),
        ("literal", "3.5e-2f"),
        ("literal", "'c'"),
        ("literal", '"s\\"t"'),
    ]


def test_spans_are_character_offsets():
    toks = lex('"é" x')
    assert toks[1].span == (4, 5)


def test_spans_increase_without_overlap(codes):
    for code in codes:
        toks = lex(code)
        for a, b in zip(toks, toks[1:]):
            assert a.span[1] <= b.span[0]
        for t in toks:
            assert code[t.span[0]:t.span[1]] == t.text


_FRAGMENTS = st.sampled_from(
    ["x", "foo", "_a1", "$v", "int", "return", "null", "42", "3.0", "0xFF", '"s"', "'c'", "+", "++", ">>=",
     "==", "->", "::", "(", ")", "{", "}", ";", ",", ".", "[", "]", "@", "?", ":"]
)


@given(st.lists(_FRAGMENTS, max_size=40))
def test_single_space_join_relexes_identically(frags):
    text = " ".join(frags)
    first = kinds(text)
    again = " ".join(t for _, t in first)
    assert kinds(again) == first
