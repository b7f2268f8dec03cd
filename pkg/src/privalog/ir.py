"""The core IR: a branch-free, vectorised imperative language.

Programs are straight-line code over vectors.  There are no conditionals
and no loops; data-dependent decisions are encoded in boolean vectors (the
satisfiability bits), and the only way private data becomes public is an
explicit `declassify` call.

Text form, one statement per line, fully parenthesised::

    (table ship (name private string) (x private int) ...)
    (goal arrival_fbbf (input 1 param portname private string) ...
          (output Ship private string) ... (aggregate min Time MinTime))
    (func arrival_fbbf_1 ((x_1 private string)) ((b private bool) (y_0 private string))
      (decl t1_0 private string)
      (assign (t1_0 t1_1) (call getTable (const name ship)))
      ...
      (return b y_0))
    (main
      ...)

Expressions: `(var x)`, `(const T v)`, `(! e)`, `(OP e1 e2)` with OP one of
`+ - * / & | < <= == != >= >`, and `(call f arg ...)` where an argument may
be a `(group e ...)` for operations that take several column groups.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from typing import Iterator, Union

from .errors import IRError

DOMAINS = ("public", "private")
TYPES = ("int", "float", "string", "bool")
ARITH = ("+", "-", "*", "/")
LOGIC = ("&", "|")
COMPARE = ("<", "<=", "==", "!=", ">=", ">")
BINOPS = ARITH + LOGIC + COMPARE


# ----------------------------------------------------------- expressions


@dataclass(frozen=True)
class EVar:
    name: str


@dataclass(frozen=True)
class EConst:
    type: str  # int | float | string | bool | name
    value: object

    def __eq__(self, other: object) -> bool:
        return (isinstance(other, EConst) and self.type == other.type
                and type(self.value) is type(other.value) and self.value == other.value)

    def __hash__(self) -> int:
        return hash((self.type, repr(self.value)))


@dataclass(frozen=True)
class ENot:
    arg: "Expr"


@dataclass(frozen=True)
class EBin:
    op: str
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class EGroup:
    items: tuple["Expr", ...]


@dataclass(frozen=True)
class ECall:
    func: str
    args: tuple[Union["Expr", EGroup], ...]


Expr = Union[EVar, EConst, ENot, EBin, ECall]


# ------------------------------------------------------------ statements


@dataclass(frozen=True)
class Decl:
    name: str
    domain: str
    type: str


@dataclass(frozen=True)
class Assign:
    targets: tuple[str, ...]
    expr: Expr


@dataclass(frozen=True)
class Do:
    expr: Expr


@dataclass(frozen=True)
class Return:
    names: tuple[str, ...]


Stmt = Union[Decl, Assign, Do, Return]


@dataclass(frozen=True)
class Param:
    name: str
    domain: str
    type: str


@dataclass(frozen=True)
class Func:
    name: str
    params: tuple[Param, ...]
    results: tuple[Param, ...]
    body: tuple[Stmt, ...]


@dataclass(frozen=True)
class TableDecl:
    name: str
    columns: tuple[Param, ...]


@dataclass(frozen=True)
class GoalInput:
    position: int
    kind: str  # "param" or "const"
    value: object  # parameter name or constant value
    domain: str
    type: str


@dataclass(frozen=True)
class GoalMeta:
    """What the client needs to know: argument names, output names and types."""

    pred: str
    inputs: tuple[GoalInput, ...]
    outputs: tuple[Param, ...]
    aggregate: tuple[str, str, str] | None = None  # (kind, over, result)


@dataclass(frozen=True)
class CoreProgram:
    tables: tuple[TableDecl, ...]
    goal: GoalMeta
    functions: tuple[Func, ...]
    main: tuple[Stmt, ...]
    strings: tuple[str, ...] = field(default=())  # string constants of the source

    def function(self, name: str) -> Func:
        for f in self.functions:
            if f.name == name:
                return f
        raise IRError(f"unknown function {name}")

    def table(self, name: str) -> TableDecl:
        for t in self.tables:
            if t.name == name:
                return t
        raise IRError(f"unknown table {name}")


# -------------------------------------------------------------- walking


def iter_exprs(e: Expr | EGroup) -> Iterator[Expr | EGroup]:
    yield e
    if isinstance(e, ENot):
        yield from iter_exprs(e.arg)
    elif isinstance(e, EBin):
        yield from iter_exprs(e.left)
        yield from iter_exprs(e.right)
    elif isinstance(e, ECall):
        for a in e.args:
            yield from iter_exprs(a)
    elif isinstance(e, EGroup):
        for a in e.items:
            yield from iter_exprs(a)


def iter_calls(stmts: tuple[Stmt, ...]) -> Iterator[ECall]:
    for s in stmts:
        if isinstance(s, (Assign, Do)):
            for e in iter_exprs(s.expr):
                if isinstance(e, ECall):
                    yield e


def all_statements(p: CoreProgram) -> Iterator[tuple[str, Stmt]]:
    for f in p.functions:
        for s in f.body:
            yield f.name, s
    for s in p.main:
        yield "main", s


# ------------------------------------------------------------- printing


def _const_text(c: EConst) -> str:
    if c.type == "string":
        return json.dumps(c.value)
    if c.type == "bool":
        return "true" if c.value else "false"
    if c.type == "float":
        return repr(float(c.value))  # type: ignore[arg-type]
    return str(c.value)


def format_expr(e: Expr | EGroup) -> str:
    if isinstance(e, EVar):
        return f"(var {e.name})"
    if isinstance(e, EConst):
        return f"(const {e.type} {_const_text(e)})"
    if isinstance(e, ENot):
        return f"(! {format_expr(e.arg)})"
    if isinstance(e, EBin):
        return f"({e.op} {format_expr(e.left)} {format_expr(e.right)})"
    if isinstance(e, EGroup):
        return "(group" + "".join(" " + format_expr(i) for i in e.items) + ")"
    if isinstance(e, ECall):
        return f"(call {e.func}" + "".join(" " + format_expr(a) for a in e.args) + ")"
    raise IRError(f"not an expression: {e!r}")


def format_stmt(s: Stmt) -> str:
    if isinstance(s, Decl):
        return f"(decl {s.name} {s.domain} {s.type})"
    if isinstance(s, Assign):
        return f"(assign ({' '.join(s.targets)}) {format_expr(s.expr)})"
    if isinstance(s, Do):
        return f"(do {format_expr(s.expr)})"
    if isinstance(s, Return):
        return f"(return {' '.join(s.names)})".replace(" )", ")")
    raise IRError(f"not a statement: {s!r}")


def _params(ps: tuple[Param, ...]) -> str:
    return "(" + " ".join(f"({p.name} {p.domain} {p.type})" for p in ps) + ")"


def format_program(p: CoreProgram) -> str:
    out = []
    for t in p.tables:
        cols = " ".join(f"({c.name} {c.domain} {c.type})" for c in t.columns)
        out.append(f"(table {t.name} {cols})".replace(" )", ")"))
    g = p.goal
    parts = [f"(goal {g.pred}"]
    for i in g.inputs:
        v = json.dumps(i.value) if i.kind == "const" and isinstance(i.value, str) else \
            (repr(i.value) if isinstance(i.value, float) else str(i.value))
        parts.append(f" (input {i.position} {i.kind} {v} {i.domain} {i.type})")
    for o in g.outputs:
        parts.append(f" (output {o.name} {o.domain} {o.type})")
    if g.aggregate:
        parts.append(" (aggregate {} {} {})".format(*g.aggregate))
    out.append("".join(parts) + ")")
    if p.strings:
        out.append("(strings " + " ".join(json.dumps(s) for s in p.strings) + ")")
    for f in p.functions:
        out.append(f"(func {f.name} {_params(f.params)} {_params(f.results)}")
        out.extend("  " + format_stmt(s) for s in f.body)
        out[-1] += ")"
    out.append("(main")
    out.extend("  " + format_stmt(s) for s in p.main)
    out[-1] += ")"
    return "\n".join(out) + "\n"


# -------------------------------------------------------------- parsing

_TOK = re.compile(r'\s*(?:(\()|(\))|("(?:[^"\\]|\\.)*")|([^\s()"]+))')


class _Str(str):
    """A token that came from a quoted string literal."""


def _sexprs(text: str) -> list:
    pos = 0
    stack: list[list] = [[]]
    text = text.rstrip()
    while pos < len(text):
        m = _TOK.match(text, pos)
        if not m or m.end() == pos:
            raise IRError(f"bad IR text near offset {pos}: {text[pos:pos + 20]!r}")
        pos = m.end()
        if m.group(1):
            stack.append([])
        elif m.group(2):
            if len(stack) == 1:
                raise IRError(f"unbalanced ')' at offset {pos}")
            done = stack.pop()
            stack[-1].append(done)
        elif m.group(3):
            stack[-1].append(_Str(json.loads(m.group(3))))
        else:
            stack[-1].append(m.group(4))
    if len(stack) != 1:
        raise IRError("unbalanced '(' in IR text")
    return stack[0]


def _num(tok: str, typ: str):
    try:
        if typ == "int":
            return int(tok)
        if typ == "float":
            return float(tok)
    except ValueError:
        raise IRError(f"bad {typ} literal {tok!r}") from None
    if typ == "bool":
        if tok not in ("true", "false"):
            raise IRError(f"bad bool literal {tok!r}")
        return tok == "true"
    return str(tok)


def _expr(x) -> Expr | EGroup:
    if not isinstance(x, list) or not x:
        raise IRError(f"expected an expression, got {x!r}")
    head = x[0]
    if head == "var" and len(x) == 2:
        return EVar(x[1])
    if head == "const" and len(x) == 3:
        return EConst(x[1], _num(x[2], x[1]))
    if head == "!" and len(x) == 2:
        return ENot(_expr(x[1]))  # type: ignore[arg-type]
    if head in BINOPS and len(x) == 3:
        return EBin(head, _expr(x[1]), _expr(x[2]))  # type: ignore[arg-type]
    if head == "group":
        return EGroup(tuple(_expr(i) for i in x[1:]))  # type: ignore[misc]
    if head == "call" and len(x) >= 2:
        return ECall(x[1], tuple(_expr(i) for i in x[2:]))
    raise IRError(f"unknown expression form {x!r}")


def _stmt(x) -> Stmt:
    if not isinstance(x, list) or not x:
        raise IRError(f"expected a statement, got {x!r}")
    head = x[0]
    if head == "decl" and len(x) == 4:
        _check(x[2], DOMAINS, "domain")
        _check(x[3], TYPES, "type")
        return Decl(x[1], x[2], x[3])
    if head == "assign" and len(x) == 3 and isinstance(x[1], list):
        return Assign(tuple(x[1]), _expr(x[2]))  # type: ignore[arg-type]
    if head == "do" and len(x) == 2:
        return Do(_expr(x[1]))  # type: ignore[arg-type]
    if head == "return":
        return Return(tuple(x[1:]))
    raise IRError(f"unknown statement form {x!r}")


def _check(v: str, allowed, what: str) -> None:
    if v not in allowed:
        raise IRError(f"unknown {what} {v!r}")


def _param_list(x) -> tuple[Param, ...]:
    out = []
    for p in x:
        if not (isinstance(p, list) and len(p) == 3):
            raise IRError(f"bad parameter {p!r}")
        _check(p[1], DOMAINS, "domain")
        _check(p[2], TYPES, "type")
        out.append(Param(p[0], p[1], p[2]))
    return tuple(out)


def parse_program(text: str) -> CoreProgram:
    tables, functions = [], []
    goal = None
    main: tuple[Stmt, ...] | None = None
    strings: tuple[str, ...] = ()
    for form in _sexprs(text):
        if not isinstance(form, list) or not form:
            raise IRError(f"unexpected top-level item {form!r}")
        head = form[0]
        if head == "table":
            tables.append(TableDecl(form[1], _param_list(form[2:])))
        elif head == "goal":
            inputs, outputs, agg = [], [], None
            for item in form[2:]:
                if item[0] == "input":
                    pos, kind, val, dom, typ = item[1:6]
                    if kind == "const":
                        val = str(val) if isinstance(val, _Str) else _num(val, typ)
                    inputs.append(GoalInput(int(pos), kind, val, dom, typ))
                elif item[0] == "output":
                    outputs.append(Param(item[1], item[2], item[3]))
                elif item[0] == "aggregate":
                    agg = (item[1], item[2], item[3])
                else:
                    raise IRError(f"unknown goal item {item!r}")
            goal = GoalMeta(form[1], tuple(inputs), tuple(outputs), agg)
        elif head == "strings":
            strings = tuple(str(s) for s in form[1:])
        elif head == "func":
            if len(form) < 4:
                raise IRError(f"malformed function {form[:2]!r}")
            functions.append(Func(form[1], _param_list(form[2]), _param_list(form[3]),
                                  tuple(_stmt(s) for s in form[4:])))
        elif head == "main":
            main = tuple(_stmt(s) for s in form[1:])
        else:
            raise IRError(f"unknown top-level form {head!r}")
    if goal is None or main is None:
        raise IRError("IR text needs a goal header and a main block")
    return CoreProgram(tuple(tables), goal, tuple(functions), main, strings)


# --------------------------------------------------------------- checks


def check_program(p: CoreProgram) -> None:
    """Structural invariants: no unknown calls, return last, one declassify in main."""
    from .simexec import BUILTINS

    names = {f.name for f in p.functions}
    for f in p.functions:
        if not f.body or not isinstance(f.body[-1], Return):
            raise IRError(f"function {f.name} must end with return")
        if any(isinstance(s, Return) for s in f.body[:-1]):
            raise IRError(f"function {f.name} returns before its last statement")
    for where, s in all_statements(p):
        if isinstance(s, (Assign, Do)):
            for e in iter_exprs(s.expr):
                if isinstance(e, ECall) and e.func not in BUILTINS and e.func not in names:
                    raise IRError(f"{where}: call to unknown function {e.func}")
                if isinstance(e, ECall) and e.func == "declassify" and where != "main":
                    raise IRError(f"{where}: declassify outside main")
    n = sum(1 for c in iter_calls(p.main) if c.func == "declassify")
    if n != 1:
        raise IRError(f"main must declassify exactly once, found {n}")
