import json
import os
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from geoproof.cdl import CDLSyntaxError, Ident, Num, Term, parse_term, render
from geoproof.dataset import (
    DictionaryError,
    SchemaError,
    load_problem,
    parse_theorem_dictionary,
)


def test_parse_angle_equality():
    t = parse_term("Equal(MeasureOfAngle(ABC),40)")
    assert t == Term("Equal", (Term("MeasureOfAngle", (Ident("ABC"),)), Num(Fraction(40))))


def test_parse_collinear():
    assert parse_term("Collinear(ADFB)") == Term("Collinear", (Ident("ADFB"),))


def test_ratio_literal_is_exact():
    t = parse_term("Equal(Div(LengthOfLine(AD),LengthOfLine(DF)),3/2)")
    assert t.args[1] == Num(Fraction(3, 2))
    assert t.args[0].head == "Div"


def test_decimal_becomes_rational():
    assert parse_term("2.5") == Num(Fraction(5, 2))


def test_whitespace_insensitive():
    assert parse_term(" Equal( MeasureOfAngle( ABC ) , 40 ) ") == parse_term("Equal(MeasureOfAngle(ABC),40)")


def test_argument_order_kept():
    t = parse_term("ParallelBetweenLine(GA,HD)")
    assert [a.name for a in t.args] == ["GA", "HD"]


@pytest.mark.parametrize("bad", ["Equal(MeasureOfAngle(ABC),40", "Equal(,40)", "Collinear(ADFB))", ""])
def test_syntax_error_has_offset(bad):
    with pytest.raises(CDLSyntaxError) as info:
        parse_term(bad)
    assert 0 <= info.value.offset <= len(bad.encode())


def test_arity_is_checked():
    with pytest.raises(CDLSyntaxError):
        parse_term("MeasureOfAngle(ABC,DEF)")


def test_unknown_head_parses_generic():
    t = parse_term("Frobnicate(AB,CD)")
    assert t.head == "Frobnicate" and len(t.args) == 2


def test_case_of_identifiers_kept():
    t = parse_term("Equal(LengthOfLine(AB),x)")
    assert t.args[1] == Ident("x")


def _record(**kw):
    base = {
        "problem_id": 1,
        "problem_level": 1,
        "construction_cdl": ["Shape(AB,BC,CA)"],
        "text_cdl": ["Equal(MeasureOfAngle(ABC),40)"],
        "goal_cdl": "Value(MeasureOfAngle(BCA))",
        "problem_answer": "9",
        "theorem_seqs": ["triangle_property_angle_sum(1,ABC)"],
    }
    base.update(kw)
    return base


def test_answer_parsed_exactly():
    assert load_problem(_record()).answer == Num(Fraction(9))


def test_empty_proof_is_valid():
    assert load_problem(_record(theorem_seqs=[])).proof == ()


def test_level_defaults_to_step_count():
    rec = _record()
    del rec["problem_level"]
    assert load_problem(rec).level == 1


@pytest.mark.parametrize("field", ["problem_id", "construction_cdl", "goal_cdl", "problem_answer"])
def test_missing_field_is_named(field):
    rec = _record()
    del rec[field]
    with pytest.raises(SchemaError, match=field):
        load_problem(rec)


def test_malformed_field_is_named():
    with pytest.raises(SchemaError, match="text_cdl"):
        load_problem(_record(text_cdl=["Equal(MeasureOfAngle(ABC),"]))


def test_level_matches_proof_length_on_corpus(small_corpus):
    assert all(p.level == len(p.proof) for p in small_corpus)


def test_empty_dictionary_file():
    assert parse_theorem_dictionary("") == {}


def test_two_variations_two_entries():
    text = json.dumps({"Theorems": {"parallel_property_alternate_interior_angle(AB,CD)": {
        "1": {"premise": "ParallelBetweenLine(AB,CD)&Line(AD)",
              "conclusion": ["Equal(MeasureOfAngle(BAD),MeasureOfAngle(CDA))"]},
        "2": {"premise": "ParallelBetweenLine(AB,CD)&Line(BC)",
              "conclusion": ["Equal(MeasureOfAngle(CBA),MeasureOfAngle(BCD))"]},
    }}})
    d = parse_theorem_dictionary(text)
    assert sorted(d) == [("parallel_property_alternate_interior_angle", 1), ("parallel_property_alternate_interior_angle", 2)]


def test_duplicate_variation_is_fatal():
    text = ('{"Theorems": {"t(AB)": {"1": {"premise": "Line(AB)", "conclusion": []},'
            ' "1": {"premise": "Line(AB)", "conclusion": []}}}}')
    with pytest.raises(DictionaryError):
        parse_theorem_dictionary(text)


def test_free_variable_outside_params_rejected():
    text = json.dumps({"Theorems": {"t(AB)": {"premise": "Line(AC)", "conclusion": []}}})
    with pytest.raises(DictionaryError, match="not parameters"):
        parse_theorem_dictionary(text)


def test_bundled_dictionary_keys_unique(dictionary):
    from geoproof.cdl import point_letters

    for thm in dictionary.values():
        used = set().union(*(point_letters(t) for t in (*thm.premise, *thm.conclusions)))
        assert used <= set("".join(thm.params)), thm.signature


# round-trip properties ------------------------------------------------------

points = st.text(alphabet="ABCDEFGH", min_size=2, max_size=3).filter(lambda s: len(set(s)) == len(s))
angle = st.text(alphabet="ABCDEFGH", min_size=3, max_size=3).filter(lambda s: len(set(s)) == 3).map(lambda s: f"MeasureOfAngle({s})")
line = st.text(alphabet="ABCDEFGH", min_size=2, max_size=2).filter(lambda s: len(set(s)) == 2).map(lambda s: f"LengthOfLine({s})")
number = st.one_of(st.integers(0, 500).map(str), st.tuples(st.integers(1, 50), st.integers(2, 9)).map(lambda t: f"{t[0]}/{t[1]}"))
atom = st.one_of(angle, line, number, st.sampled_from(["x", "y"]))
expr = st.recursive(atom, lambda inner: st.tuples(st.sampled_from(["Add", "Sub", "Mul", "Div"]), inner, inner).map(lambda t: f"{t[0]}({t[1]},{t[2]})"), max_leaves=6)
equation = st.tuples(expr, expr).map(lambda t: f"Equal({t[0]},{t[1]})")


@given(equation)
@settings(max_examples=200)
def test_render_parse_round_trip(src):
    t = parse_term(src)
    assert parse_term(render(t)) == t


def test_round_trip_over_corpus(small_corpus):
    for p in small_corpus:
        for t in (*p.construction, *p.conditions, p.goal):
            assert parse_term(render(t)) == t


@pytest.mark.skipif("GEOPROOF_FULL_GDL" not in os.environ, reason="set GEOPROOF_FULL_GDL to the published theorem file")
def test_full_dictionary_size():
    from geoproof.dataset import load_theorem_dictionary

    d = load_theorem_dictionary(os.environ["GEOPROOF_FULL_GDL"])
    assert len(d) == 234
    assert len({name for name, _ in d}) == 196
