import pytest

from privalog.ast import Aggregation, Atom, BinOp, Cmp, Const, Not, Or, Param, Var
from privalog.errors import ParseError, ValidationError
from privalog.parser import (
    format_program,
    parse,
    parse_clause,
    parse_formula,
    parse_term,
    tokenize,
)

from conftest import EXAMPLES, example

SHIP = example("ship_mintime.pl")


@pytest.mark.parametrize("name", sorted(p.name for p in EXAMPLES.glob("*.pl")))
def test_examples_round_trip(name):
    p = parse(example(name))
    assert parse(format_program(p)) == p


def test_ship_schema_and_goal():
    p = parse(SHIP)
    ship = p.schema("ship")
    assert [c.name for c in ship.columns][:3] == ["name", "x", "y"]
    assert ship.columns[0].private and ship.columns[0].dtype == "string"
    assert not p.schema("port").columns[1].private
    assert ship.primary_key == 0
    g = p.goal
    assert g.pred == "arrival"
    assert g.args[1] == Param("portname")
    assert g.aggregation == Aggregation("min", "Time", "MinTime")


def test_operator_precedence():
    t = parse_term("A - B - C * D ^ 2")
    assert t == BinOp("-", BinOp("-", Var("A"), Var("B")),
                      BinOp("*", Var("C"), BinOp("^", Var("D"), Const(2))))


def test_negative_literals_and_floats():
    assert parse_term("-3") == Const(-3)
    assert parse_term("2.5e1") == Const(25.0)
    assert parse_term("'it\\'s'") == Const("it's")


def test_formula_connectives():
    f = parse_formula("X > 1, \\+ e(X) ; X =:= 0")
    assert isinstance(f, Or)
    c = parse_clause("p(X) :- e(X), \\+ q(X, _).")
    assert isinstance(c.head, Atom)
    assert any(isinstance(x, Not) for x in c.body.items)


def test_comment_lines_are_skipped():
    toks = tokenize("% a comment\np(1).")
    assert [t.text for t in toks][:2] == ["p", "("]


@pytest.mark.parametrize("src, where", [
    ("p(X) :- . ?-p(X).", "line 1"),
    (":-type(e(a:secret int)).", "secret"),
    (":-type(e(a:private int)).\np(X) :- e(X)\n?-p(X).", "line"),
])
def test_parse_errors_carry_positions(src, where):
    with pytest.raises(ParseError) as ei:
        parse(src)
    assert where in str(ei.value)


@pytest.mark.parametrize("src, msg", [
    ("p(X) :- q(X). ?-p(X).", "unknown predicate q/1"),
    (":-type(e(a:private int)).\np(X) :- e(X).\np(X,Y) :- e(X), Y is X.\n?-p(X).", "arity"),
])
def test_validation_errors(src, msg):
    with pytest.raises(ValidationError, match=msg):
        parse(src)


def test_comparison_operators_parse():
    for op in ("<", "=<", ">", ">=", "=:=", "=/=", "=", "is"):
        f = parse_formula(f"X {op} 1")
        assert isinstance(f, Cmp) and f.op == op
