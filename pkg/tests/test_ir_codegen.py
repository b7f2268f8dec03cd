import pytest

from privalog import ir
from privalog.codegen import CompileOptions, compile_source, to_secrec
from privalog.errors import CompileError, IRError

from conftest import example

SMALL = (":-type(e(a:private int, s:public string)).\n"
         "q(X,S) :- e(X,S), X > 1, \\+ e(_, 'z').\n?-q(X,S).")


@pytest.fixture(scope="module")
def ship():
    return compile_source(example("ship_mintime.pl"))


def test_text_round_trip(ship):
    text = ir.format_program(ship.core)
    assert ir.parse_program(text) == ship.core
    assert ir.format_program(ir.parse_program(text)) == text


def test_goal_header_describes_inputs_and_aggregate(ship):
    g = ship.core.goal
    assert g.pred == "arrival_fbbf"
    assert [(i.kind, i.value, i.type) for i in g.inputs] == [
        ("param", "portname", "string"), ("param", "cargotype", "string")]
    assert [(o.name, o.type) for o in g.outputs] == [("Ship", "string"), ("Time", "float")]
    assert g.aggregate == ("min", "Time", "MinTime")


def test_main_declassifies_once_and_publishes(ship):
    calls = [c.func for c in ir.iter_calls(ship.core.main)]
    assert calls.count("declassify") == 1
    assert "shuffle" in calls and "min_masked" in calls and calls[-1] == "publish"


def test_small_program_shape():
    core = compile_source(SMALL).core
    (f,) = core.functions
    assert [r.name for r in f.results] == ["b", "y_0", "y_1"]
    assert isinstance(f.body[-1], ir.Return)
    funcs = {c.func for c in ir.iter_calls(f.body)}
    assert {"getTable", "join", "member", "ones"} <= funcs
    assert core.strings == ("z",)


def test_string_arithmetic_is_a_compile_error():
    src = ":-type(e(s:private string)).\nq(Y) :- e(S), Y is S + 1.\n?-q(Y)."
    with pytest.raises(CompileError):
        compile_source(src)


def test_string_ordering_is_a_compile_error():
    src = ":-type(e(s:private string)).\nq(S) :- e(S), S < 'm'.\n?-q(S)."
    with pytest.raises(CompileError):
        compile_source(src)


def test_param_type_follows_column_evidence():
    src = ":-type(e(s:private string, v:private float)).\nq(S, V) :- e(S, V).\n?-q(@who, V)."
    g = compile_source(src).core.goal
    assert [(i.value, i.type) for i in g.inputs] == [("who", "string")]


def test_no_rules_left_gives_empty_concat():
    src = ":-type(e(a:private int)).\nq(X) :- e(X), X > 2, X < 1.\n?-q(X)."
    comp = compile_source(src)
    assert comp.core.functions == ()
    assert "(call empty" in ir.format_program(comp.core)


def test_options_change_the_rule_base():
    src = ":-type(e(a:private int)).\nq(X) :- e(X), X > 2, X < 1.\nq(X) :- e(X).\n?-q(X)."
    assert len(compile_source(src).rulebase.rules) == 1
    assert len(compile_source(src, CompileOptions(prune=False)).rulebase.rules) == 2


def test_dumps_and_secrec(ship):
    assert "arrival_fbbf(" in ship.dump_adorned()
    assert ship.dump_rulebase().startswith("% unfolding: strategy full")
    assert ":-" in ship.dump_dnf()
    sc = to_secrec(ship.core)
    assert "declassify" in sc and "pd_shared3p" in sc


@pytest.mark.parametrize("text, msg", [
    ("(garbage", "unbalanced"),
    ("(main (return x))", "goal header"),
    ("(goal p) (main (assign (x) (call nosuch)))", "unknown function"),
    ("(goal p) (main (decl x int))", "unknown"),
])
def test_malformed_ir(text, msg):
    with pytest.raises(IRError, match=msg):
        prog = ir.parse_program(text)
        ir.check_program(prog)


def test_check_program_requires_one_declassify(ship):
    main = tuple(s for s in ship.core.main
                 if not (isinstance(s, ir.Assign) and isinstance(s.expr, ir.ECall)
                         and s.expr.func == "declassify"))
    bad = ir.CoreProgram(ship.core.tables, ship.core.goal, ship.core.functions, main)
    with pytest.raises(IRError, match="exactly once"):
        ir.check_program(bad)
