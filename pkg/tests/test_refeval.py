import math

import pytest

from privalog import interp
from privalog.parser import parse
from privalog.refeval import (
    NotRangeRestricted,
    Rel,
    aggregate,
    cross,
    difference,
    eval_program,
    project,
    select,
    union,
)
from privalog.parser import parse_formula
from privalog.relation import Database

from conftest import example

EDGE = ":-type(e(a:private int, b:private int)).\n"


def _db(program, **rows):
    return Database.from_rows(program.schemas, rows)


def test_transitive_closure_on_a_cycle():
    p = parse(EDGE + "r(X,Y) :- e(X,Y).\nr(X,Z) :- e(X,Y), r(Y,Z).\n?-r(@s,Y).")
    a = eval_program(p, _db(p, e=[(1, 2), (2, 3), (3, 1), (4, 5)]), {"s": 1})
    assert a.rows == {(1,), (2,), (3,)} and a.fixpoint


def test_iteration_bound_limits_proof_height():
    p = parse(EDGE + "r(X,Y) :- e(X,Y).\nr(X,Z) :- e(X,Y), r(Y,Z).\n?-r(0,Y).")
    chain = _db(p, e=[(i, i + 1) for i in range(6)])
    assert eval_program(p, chain, max_iter=2).rows == {(1,), (2,)}
    assert eval_program(p, chain).rows == {(i,) for i in range(1, 7)}


def test_negation_with_anonymous_arguments():
    p = parse(EDGE + "q(X) :- e(X,_), \\+ e(_, X).\n?-q(X).")
    assert eval_program(p, _db(p, e=[(1, 2), (2, 3)])).rows == {(1,)}


def test_fib_against_iterative_oracle():
    p = parse(example("fib.pl"))
    a, b = 1, 1
    for n in range(11):
        assert eval_program(p, Database(), {"n": n}).rows == {(a,)}
        a, b = b, a + b
    assert eval_program(p, Database(), {"n": 11}).rows == frozenset()


def test_answers_are_sets_before_aggregation():
    p = parse(EDGE + "q(Y) :- e(_, Y).\n?-sum(q(Y), Y, S).")
    assert eval_program(p, _db(p, e=[(1, 5), (2, 5), (3, 1)])).aggregate == 6


def test_aggregates_over_empty_answers():
    for kind, want in (("count", 0), ("sum", 0), ("min", interp.EmptyAggregate),
                       ("max", interp.EmptyAggregate)):
        p = parse(EDGE + f"q(X) :- e(X, _).\n?-{kind}(q(X), X, R).")
        assert eval_program(p, _db(p)).aggregate is want or \
            eval_program(p, _db(p)).aggregate == want


def test_aggregate_helper():
    assert aggregate([(1,), (4,)], "max", 0) == 4
    assert aggregate([(2.5,), (1,)], "min", 0) == 1
    assert aggregate([], "count", 0) == 0


def test_float_arithmetic_and_garbage():
    p = parse(":-type(e(a:private int)).\nq(Y) :- e(X), Y is 1 / X.\n?-q(Y).")
    rows = eval_program(p, _db(p, e=[(0,), (4,)])).rows
    assert (0.25,) in rows
    assert any(isinstance(r[0], float) and math.isnan(r[0]) for r in rows)


def test_int_arithmetic_wraps_at_64_bits():
    assert interp.add(2**63 - 1, 1) == -(2**63)
    assert interp.mul(2**62, 4) == 0


def test_unbound_head_variable_is_reported():
    p = parse(EDGE + "q(X, Y) :- e(X, _).\n?-q(X, Y).")
    with pytest.raises(NotRangeRestricted):
        eval_program(p, _db(p, e=[(1, 2)]))


def test_relational_algebra_helpers():
    r = Rel(("X", "Y"), frozenset({(1, 2), (2, 3)}))
    s = Rel(("Z",), frozenset({(7,)}))
    assert len(cross(r, s).rows) == 2
    assert project(r, ["Y"]).rows == {(2,), (3,)}
    assert select(r, parse_formula("X > 1")).rows == {(2, 3)}
    assert union(r, r).rows == r.rows
    assert difference(r, select(r, parse_formula("X > 1"))).rows == {(1, 2)}
