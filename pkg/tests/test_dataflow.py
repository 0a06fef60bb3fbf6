from collections import Counter

from hypothesis import given, settings
from hypothesis import strategies as st

from javagen.java import FlowEdge, extract_dataflow, lex, parse


def edges(code):
    return Counter(str(e) for e in extract_dataflow(parse(code)).elements())


def test_declaration_chain():
    assert edges("int a=1; int b=a;") == Counter({"(v1 computed_from v0)": 1})


def test_no_variables_no_edges():
    assert edges("return 1;") == Counter()


def test_alpha_equivalent_snippets_agree():
    assert edges("int b=a;") == edges("int b=c;") == Counter({"(v0 computed_from v1)": 1})


def test_reads_after_definition_are_comes_from():
    got = edges("void f(int n) { int s = 0; s += n; return s; }")
    assert got == Counter(
        {"(v1 computed_from v1)": 1, "(v1 computed_from v0)": 1, "(v1 comes_from v1)": 1}
    )


def test_statement_level_increment_is_not_a_read():
    assert edges("x++;") == Counter({"(v0 computed_from v0)": 1})


def test_field_and_method_names_are_ignored():
    assert edges("void f() { int a = obj.size(); }") == Counter({"(v0 computed_from v1)": 1})


def test_edge_rendering():
    assert str(FlowEdge("v1", "v0", "computed_from")) == "(v1 computed_from v0)"


def _rename(code, mapping):
    return " ".join(mapping.get(t.text, t.text) if t.kind == "identifier" else t.text for t in lex(code))


@settings(max_examples=60, deadline=None)
@given(st.data())
def test_invariant_under_consistent_renaming(codes, data):
    code = data.draw(st.sampled_from(codes))
    names = sorted({t.text for t in lex(code) if t.kind == "identifier"})
    order = data.draw(st.permutations(list(range(len(names)))))
    mapping = {n: f"id{k}" for n, k in zip(names, order)}
    assert extract_dataflow(parse(_rename(code, mapping))) == extract_dataflow(parse(code))
