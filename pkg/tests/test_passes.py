"""Normalisation, adornment, unfolding and pruning."""

import pytest

from privalog.adorn import adorn, desugar_heads, split_eq
from privalog.ast import Atom, BinOp, Cmp, Const, Not, Or, Var
from privalog.errors import CompileError
from privalog.normalize import nnf, to_ordered_dnf
from privalog.parser import parse, parse_formula, parse_term
from privalog.prune import (
    Verdict,
    check_consistent,
    emit_smtlib,
    merge_primary_keys,
    prune_rules,
    to_smtlib,
)
from privalog.refeval import eval_program
from privalog.relation import Database
from privalog.unfold import fold_term, unfold_program

from conftest import example

SHIP = parse(example("ship_mintime.pl"))
FIB = parse(example("fib.pl"))


@pytest.fixture(scope="module")
def fib_rb():
    return unfold_program(adorn(FIB), max_iter=10)


# ------------------------------------------------------------- normalise

def test_nnf_pushes_negation_to_literals():
    f = nnf(parse_formula("\\+ (X > 1, Y < 2)"))
    assert f == Or((Not(Cmp(">", Var("X"), Const(1))), Not(Cmp("<", Var("Y"), Const(2)))))


def test_dnf_splits_on_atoms_and_keeps_order():
    branches = to_ordered_dnf(parse_formula("Y is X + 1, (X > 1 ; e(X))"), [])
    assert len(branches) == 2
    assert all(isinstance(b.items[0], Cmp) and b.items[0].op == "is" for b in branches)
    assert isinstance(branches[1].items[1], Atom)


def test_ground_disjunction_stays_inline():
    (b,) = to_ordered_dnf(parse_formula("(X > 1 ; X < 0), Y is X + 1"), ["X"])
    assert isinstance(b.items[0], Or)


# ----------------------------------------------------------------- adorn

def test_ship_adornment_patterns():
    ap = adorn(SHIP)
    assert ap.patterns == {"arrival_fbbf": "fbbf", "reachability_time_bbf": "bbf",
                           "suitable_port_bb": "bb"}
    assert ap.goal.pred == "arrival_fbbf"


def test_fib_heads_desugared_and_bound_input_tested():
    ap = adorn(FIB)
    facts = [c for c in ap.clauses if len(c.body.items) == 2]
    assert {c.body.items[0].op for c in facts} == {"=:="}
    assert all(len({a.name for a in c.head.args}) == 2 for c in ap.clauses)


def test_equality_resolution_depends_on_boundness():
    p = parse(":-type(e(a:private int)).\np(X, Y) :- e(X), Y = X + 1, Y = 3.\n?-p(X, Y).")
    (c,) = adorn(p).clauses
    ops = [lit.op for lit in c.body.items if isinstance(lit, Cmp)]
    assert ops == ["=", "=:="]


def test_goal_on_edb_is_rejected():
    p = parse(":-type(e(a:private int)).\np(X) :- e(X).\n?-e(X).")
    with pytest.raises(CompileError, match="EDB"):
        adorn(p)


@pytest.mark.parametrize("stage", [desugar_heads, lambda p: adorn(p).program,
                                   lambda p: split_eq(adorn(p)).program])
def test_stages_preserve_ship_answers(stage, ship_db):
    args = {"portname": "alma", "cargotype": "carrot"}
    assert eval_program(stage(SHIP), ship_db, args).aggregate == \
        eval_program(SHIP, ship_db, args).aggregate


# ---------------------------------------------------------------- unfold

def test_constant_folding():
    assert fold_term(parse_term("2 * 3 + X")) == BinOp("+", Const(6), Var("X"))


def test_ship_unfolds_to_edb_only_rules():
    rb = unfold_program(adorn(SHIP))
    assert rb.fixpoint and rb.iterations == 2
    idb = {"arrival_fbbf", "suitable_port_bb", "reachability_time_bbf"}
    for r in rb.rules:
        assert not any(isinstance(x, Atom) and x.pred in idb for x in r.body.items)


def test_primary_key_merge_removes_repeated_ship_atoms():
    ap = adorn(SHIP)
    plain = unfold_program(ap, merge_keys=False).for_pred("arrival_fbbf")[0]
    merged = unfold_program(ap, merge_keys=True).for_pred("arrival_fbbf")[0]

    def ships(r):
        return sum(isinstance(x, Atom) and x.pred == "ship" for x in r.body.items)
    assert ships(plain) == 3 and ships(merged) == 1


def test_fib_unfolding_hits_the_bound(fib_rb):
    rb = fib_rb
    assert not rb.fixpoint and rb.iterations == 10
    # one rule per n = 0..10 survives pruning of n > 1 chains
    assert len(rb.rules) == 11


@pytest.mark.parametrize("n, want", [(0, 1), (5, 8), (9, 55)])
def test_unfolded_fib_evaluates_like_source(n, want, fib_rb):
    prog = fib_rb.to_program(FIB.schemas, adorn(FIB).goal)
    assert eval_program(prog, Database(), {"n": n}).rows == {(want,)}


def test_leftmost_strategy_matches_full_on_ship(ship_db):
    ap = adorn(SHIP)
    args = {"portname": "alma", "cargotype": "carrot"}
    full = unfold_program(ap, strategy="full").to_program(SHIP.schemas, ap.goal)
    left = unfold_program(ap, strategy="leftmost").to_program(SHIP.schemas, ap.goal)
    assert eval_program(full, ship_db, args).aggregate == eval_program(left, ship_db, args).aggregate


def test_unfold_rejects_bad_arguments():
    with pytest.raises(ValueError):
        unfold_program(adorn(FIB), max_iter=-1)
    with pytest.raises(ValueError):
        unfold_program(adorn(FIB), strategy="sideways")


# ----------------------------------------------------------------- prune

@pytest.mark.parametrize("body, verdict", [
    ("X > 2, X < 1", Verdict.UNSAT),
    ("X =:= 1, X =:= 2", Verdict.UNSAT),
    ("X > 0, X + 1 < 0, X < 10", Verdict.UNSAT),
    ("X > 0", Verdict.SATISFIABLE),
    ("X >= 1, X =< 1", Verdict.SATISFIABLE),
    ("X =/= 3", Verdict.SATISFIABLE),
])
def test_consistency_verdicts(body, verdict):
    assert check_consistent(parse_formula(body)) is verdict


@pytest.mark.parametrize("body", [
    # wraps to a negative number: must not be pruned
    "X is 9223372036854775807 + 1, X < 0",
    # X could be infinite, making X * 0 garbage
    "X * 0 > 1",
    "e(X), X > 1",
])
def test_conservative_cases_are_not_pruned(body):
    assert check_consistent(parse_formula(body)) is not Verdict.UNSAT


def test_external_solver_can_only_add_unsat():
    body = parse_formula("X * X < 0")
    assert check_consistent(body, solver=lambda q: "unsat") is Verdict.UNSAT
    assert check_consistent(body, solver=lambda q: "unknown") is Verdict.UNKNOWN


def test_prune_rules_partition():
    p = parse(":-type(e(a:private int)).\np(X) :- e(X), X > 2, X < 1.\np(X) :- e(X).\n?-p(X).")
    kept, pruned = prune_rules(p.clauses)
    assert len(kept) == 1 and len(pruned) == 1


def test_smtlib_text(tmp_path):
    text = to_smtlib(parse_formula("X > 2, Y =:= X * 2"))
    assert "(declare-fun |X| () Real)" in text and text.rstrip().endswith("(check-sat)")
    paths = emit_smtlib(unfold_program(adorn(SHIP)).rules, tmp_path)
    assert paths and all(p.read_text().startswith("(set-logic") for p in paths)


def test_merge_primary_keys_turns_second_atom_into_equalities():
    p = parse(":-type(t(k:private int, v:private int)).\n:-primary_key(t, k).\n"
              "p(A, B) :- t(K, A), t(K, B).\n?-p(A, B).")
    merged = merge_primary_keys(p.clauses[0], p.schemas)
    assert sum(isinstance(x, Atom) for x in merged.body.items) == 1
