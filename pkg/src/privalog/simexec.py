"""Simulated execution of core IR programs.

Values are vectors (numpy arrays) tagged with a data type and a privacy
label.  The arithmetic blackbox is simulated in the clear; what is modelled
is the observation boundary: a private value can only reach a public
variable through `declassify`, every declassification and every publish
is appended to a leak log, and nothing else leaves the blackbox.

Strings are represented by the CRC32 hash of their UTF-8 bytes, stored as
int64.  Published string columns are decoded through a dictionary built
from the database, the program constants and the client arguments.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Iterable, Mapping, Sequence

import numpy as np

from . import interp, ir, kernels, vecops
from .errors import ExecutionError, LabelError
from .relation import Database

_DTYPE = {"int": np.int64, "float": np.float64, "bool": np.bool_, "string": np.int64}
INT64_MAX = np.iinfo(np.int64).max
INT64_MIN = np.iinfo(np.int64).min


@dataclass(frozen=True)
class Vec:
    data: np.ndarray
    type: str
    domain: str

    def __len__(self) -> int:
        return int(self.data.shape[0])


def _vec(data, typ: str, domain: str) -> Vec:
    return Vec(np.ascontiguousarray(np.asarray(data, dtype=_DTYPE[typ]).reshape(-1)), typ, domain)


def _dom(*vs: Vec) -> str:
    return "private" if any(v.domain == "private" for v in vs) else "public"


# ------------------------------------------------------------------ leak log


@dataclass(frozen=True)
class LeakEvent:
    kind: str  # "declassify" | "publish"
    values: tuple
    name: str | None = None

    def to_json(self) -> str:
        d: dict = {"event": self.kind, "values": [_jsonable(v) for v in self.values]}
        if self.name is not None:
            d["name"] = self.name
        return json.dumps(d)


def _jsonable(v):
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if isinstance(v, (int, np.integer)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        f = float(v)
        return f if math.isfinite(f) else repr(f)
    if isinstance(v, (list, tuple)):
        return [_jsonable(x) for x in v]
    if v is interp.EmptyAggregate:
        return None
    return v


@dataclass
class LeakLog:
    """Append-only record of what crossed the blackbox boundary."""

    events: list[LeakEvent] = field(default_factory=list)

    def append(self, ev: LeakEvent) -> None:
        self.events.append(ev)

    def of_kind(self, kind: str) -> list[LeakEvent]:
        return [e for e in self.events if e.kind == kind]

    def to_jsonl(self) -> str:
        return "".join(e.to_json() + "\n" for e in self.events)

    def write(self, path: str | Path) -> None:
        Path(path).write_text(self.to_jsonl())

    @classmethod
    def read(cls, path: str | Path) -> "LeakLog":
        out = cls()
        for line in Path(path).read_text().splitlines():
            if line.strip():
                d = json.loads(line)
                out.append(LeakEvent(d["event"], tuple(d["values"]), d.get("name")))
        return out


# --------------------------------------------------------------- run state


@dataclass
class RunResult:
    """Published outputs of one run."""

    columns: tuple[str, ...]
    published: dict[str, list]
    leak_log: LeakLog
    aggregate: object = None
    aggregate_name: str | None = None

    @property
    def rows(self) -> list[tuple]:
        cols = [self.published.get(c, []) for c in self.columns]
        return list(zip(*cols)) if cols else []

    @property
    def is_aggregate(self) -> bool:
        return self.aggregate_name is not None


class _Machine:
    def __init__(self, prog: ir.CoreProgram, db: Database, args: Mapping[str, object],
                 seed: int | None):
        self.prog = prog
        self.db = db
        self.args = dict(args)
        self.rng = np.random.default_rng(seed)
        self.log = LeakLog()
        self.published: dict[str, tuple[Vec, Vec | None]] = {}
        self.table_cache: dict[str, tuple[Vec, ...]] = {}
        self.funcs = {f.name: f for f in prog.functions}
        self.depth = 0

    # scopes ------------------------------------------------------------
    def exec_block(self, stmts: Sequence[ir.Stmt], scope: dict, decls: dict) -> tuple[Vec, ...] | None:
        for s in stmts:
            if isinstance(s, ir.Decl):
                if s.name in decls:
                    raise ExecutionError(f"variable {s.name} declared twice")
                decls[s.name] = (s.domain, s.type)
            elif isinstance(s, ir.Assign):
                vals = self.eval_multi(s.expr, scope)
                if len(vals) != len(s.targets):
                    raise ExecutionError(
                        f"assignment to {len(s.targets)} variables from {len(vals)} values")
                declass = isinstance(s.expr, ir.ECall) and s.expr.func == "declassify"
                for t, v in zip(s.targets, vals):
                    scope[t] = self.store(t, v, decls, declass)
            elif isinstance(s, ir.Do):
                self.eval_multi(s.expr, scope)
            elif isinstance(s, ir.Return):
                return tuple(self.lookup(n, scope) for n in s.names)
            else:
                raise ExecutionError(f"unknown statement {s!r}")
        return None

    def store(self, name: str, v: Vec, decls: dict, declassified: bool) -> Vec:
        if name not in decls:
            raise ExecutionError(f"assignment to undeclared variable {name}")
        dom, typ = decls[name]
        if v.type != typ:
            raise ExecutionError(f"variable {name} is {typ}, assigned a {v.type} value")
        if dom == "public" and v.domain == "private" and not declassified:
            raise LabelError(f"private value assigned to public variable {name}")
        return Vec(v.data, typ, dom if dom == "private" or declassified else v.domain)

    def lookup(self, name: str, scope: dict) -> Vec:
        try:
            return scope[name]
        except KeyError:
            raise ExecutionError(f"variable {name} used before assignment") from None

    # expressions ---------------------------------------------------------
    def eval(self, e: ir.Expr, scope: dict) -> Vec:
        vals = self.eval_multi(e, scope)
        if len(vals) != 1:
            raise ExecutionError(f"expression yields {len(vals)} values where one is expected")
        return vals[0]

    def eval_multi(self, e: ir.Expr, scope: dict) -> tuple[Vec, ...]:
        if isinstance(e, ir.EVar):
            return (self.lookup(e.name, scope),)
        if isinstance(e, ir.EConst):
            return (self.const(e),)
        if isinstance(e, ir.ENot):
            a = self.eval(e.arg, scope)
            if a.type != "bool":
                raise ExecutionError("! applied to a non-boolean vector")
            return (Vec(~a.data, "bool", a.domain),)
        if isinstance(e, ir.EBin):
            return (binop(e.op, self.eval(e.left, scope), self.eval(e.right, scope)),)
        if isinstance(e, ir.ECall):
            if e.func in self.funcs:
                return self.call(self.funcs[e.func], [self.eval(a, scope) for a in e.args])
            try:
                op = BUILTINS[e.func]
            except KeyError:
                raise ExecutionError(f"unknown function {e.func}") from None
            args = [self.group(a, scope) if isinstance(a, ir.EGroup) else
                    (a.value if isinstance(a, ir.EConst) and a.type == "name" else self.eval(a, scope))
                    for a in e.args]
            out = op(self, *args)
            return out if isinstance(out, tuple) else (out,)
        raise ExecutionError(f"cannot evaluate {e!r}")

    def group(self, g: ir.EGroup, scope: dict) -> list[Vec]:
        return [self.eval(i, scope) for i in g.items]

    def const(self, e: ir.EConst) -> Vec:
        if e.type == "string":
            return _vec([kernels.crc32(str(e.value).encode("utf-8"))], "string", "public")
        if e.type == "name":
            raise ExecutionError(f"name constant {e.value!r} used as a value")
        return _vec([e.value], e.type, "public")

    def call(self, f: ir.Func, args: list[Vec]) -> tuple[Vec, ...]:
        if len(args) != len(f.params):
            raise ExecutionError(f"{f.name} takes {len(f.params)} arguments, got {len(args)}")
        self.depth += 1
        if self.depth > 64:
            raise ExecutionError("call depth exceeded")
        scope: dict[str, Vec] = {}
        decls: dict[str, tuple[str, str]] = {}
        for p, a in zip(f.params, args):
            decls[p.name] = (p.domain, p.type)
            scope[p.name] = self.store(p.name, a, decls, False)
        out = self.exec_block(f.body, scope, decls)
        self.depth -= 1
        if out is None:
            raise ExecutionError(f"{f.name} ended without return")
        if len(out) != len(f.results):
            raise ExecutionError(f"{f.name} returned {len(out)} values, declares {len(f.results)}")
        res = []
        for r, v in zip(f.results, out):
            rdecl = {r.name: (r.domain, r.type)}
            res.append(self.store(r.name, v, rdecl, False))
        return tuple(res)

    # tables ----------------------------------------------------------------
    def table(self, name: str) -> tuple[Vec, ...]:
        if name in self.table_cache:
            return self.table_cache[name]
        decl = self.prog.table(name)
        if name not in self.db:
            raise ExecutionError(f"unknown table {name}")
        rel = self.db[name]
        if rel.arity != len(decl.columns):
            raise ExecutionError(f"table {name} has {rel.arity} columns, program expects "
                                 f"{len(decl.columns)}")
        cols = []
        for i, c in enumerate(decl.columns):
            if rel.columns[i].dtype != c.type:
                raise ExecutionError(f"column {c.name} of {name} is {rel.columns[i].dtype}, "
                                     f"program expects {c.type}")
            raw = rel.column(i)
            if c.type == "string":
                data = kernels.crc32_many(raw)  # the hashed shadow column
            else:
                data = np.asarray(raw, dtype=_DTYPE[c.type]).reshape(-1)
            cols.append(Vec(data, c.type, c.domain))
        self.table_cache[name] = tuple(cols)
        return self.table_cache[name]


# ------------------------------------------------------------- operators


def _same_len(a: Vec, b: Vec) -> None:
    if len(a) != len(b) and len(a) != 1 and len(b) != 1:
        raise ExecutionError(f"vector length mismatch: {len(a)} and {len(b)}")


def binop(op: str, a: Vec, b: Vec) -> Vec:
    _same_len(a, b)
    dom = _dom(a, b)
    if op in ("&", "|"):
        if a.type != "bool" or b.type != "bool":
            raise ExecutionError(f"{op} applied to non-boolean vectors")
        return Vec(a.data & b.data if op == "&" else a.data | b.data, "bool", dom)
    strs = (a.type == "string", b.type == "string")
    if op in ir.COMPARE:
        if any(strs):
            if not all(strs) or op not in ("==", "!="):
                raise ExecutionError(f"comparison {op} on string hashes")
            data = a.data == b.data if op == "==" else a.data != b.data
            return Vec(np.asarray(data, dtype=np.bool_), "bool", dom)
        return Vec(np.asarray(vecops.IR_COMPARE[op](a.data, b.data), dtype=np.bool_), "bool", dom)
    if op in ir.ARITH:
        if any(strs) or "bool" in (a.type, b.type):
            raise ExecutionError(f"arithmetic {op} on {a.type} and {b.type}")
        data = vecops.ARITH[op](a.data, b.data)
        typ = "int" if data.dtype.kind in "iu" else "float"
        return _vec(data, typ, dom)
    raise ExecutionError(f"unknown operator {op}")


def _num(v: Vec, what: str) -> None:
    if v.type not in ("int", "float"):
        raise ExecutionError(f"{what} expects a number, got {v.type}")


def op_get_table(m: _Machine, name: str) -> tuple[Vec, ...]:
    return m.table(name)


def op_join(m: _Machine, *groups: list[Vec]) -> tuple[Vec, ...]:
    sizes = []
    for g in groups:
        if not g:
            raise ExecutionError("join of an empty column group")
        n = len(g[0])
        if any(len(v) != n for v in g):
            raise ExecutionError("join: columns of one table differ in length")
        sizes.append(n)
    idx = kernels.cross_indices(sizes)
    out = []
    for g, ix in zip(groups, idx):
        out.extend(Vec(v.data[ix], v.type, v.domain) for v in g)
    return tuple(out)


def coerce_arg(value: object, typ: str) -> object:
    """Convert a client argument to the declared parameter type."""
    if typ == "string":
        return str(value)
    if isinstance(value, str):
        text = value.strip()
        try:
            value = int(text)
        except ValueError:
            try:
                value = float(text)
            except ValueError:
                raise ExecutionError(f"argument {value!r} is not a number") from None
    if typ == "int":
        if isinstance(value, float):
            if not value.is_integer():
                raise ExecutionError(f"argument {value!r} is not an integer")
            value = int(value)
        if not INT64_MIN <= int(value) <= INT64_MAX:
            raise ExecutionError(f"argument {value} outside the 64-bit range")
        return int(value)
    return float(value)


def op_argument(m: _Machine, name: str) -> Vec:
    if name not in m.args:
        raise ExecutionError(f"missing client argument @{name}")
    typ = next((i.type for i in m.prog.goal.inputs if i.kind == "param" and i.value == name), None)
    if typ is None:
        raise ExecutionError(f"argument @{name} is not declared by the goal")
    v = coerce_arg(m.args[name], typ)
    if typ == "string":
        return _vec([kernels.crc32(str(v).encode("utf-8"))], "string", "private")
    return _vec([v], typ, "private")


def op_declassify(m: _Machine, x) -> tuple[Vec, ...]:
    vs = x if isinstance(x, list) else [x]
    m.log.append(LeakEvent("declassify", tuple(tuple(v.data.tolist()) for v in vs)
                           if len(vs) > 1 else tuple(vs[0].data.tolist())))
    return tuple(Vec(v.data, v.type, "public") for v in vs)


def op_publish(m: _Machine, name: str, x: Vec, present: Vec | None = None) -> tuple[Vec, ...]:
    if x.domain != "public" and present is not None:
        raise LabelError(f"publishing the private aggregate {name} without declassify")
    m.published[name] = (x, present)
    vals = tuple(x.data.tolist())
    if present is not None and not bool(present.data.all()):
        vals = ()
    m.log.append(LeakEvent("publish", vals, name))
    return ()


def op_filter(m: _Machine, x: Vec, b: Vec) -> Vec:
    if b.type != "bool":
        raise ExecutionError("filter mask is not boolean")
    if b.domain != "public":
        raise LabelError("filter with a private mask would reveal its popcount")
    if len(x) != len(b):
        raise ExecutionError(f"filter length mismatch: {len(x)} values, {len(b)} mask bits")
    return Vec(x.data[b.data], x.type, x.domain)


def _canonical_keys(vs: Sequence[Vec], n: int) -> np.ndarray:
    """int64 key matrix with exact, canonical equality (one NaN, no -0.0)."""
    cols = []
    for v in vs:
        d = np.broadcast_to(v.data, (n,))
        if v.type == "float":
            f = np.where(d == 0.0, 0.0, d)
            f = np.where(np.isnan(f), np.nan, f).astype(np.float64)
            cols.append(f.view(np.int64))
        else:
            cols.append(d.astype(np.int64))
    if not cols:
        return np.zeros((n, 0), dtype=np.int64)
    return np.ascontiguousarray(np.stack(cols, axis=1))


def op_unique(m: _Machine, b: Vec, keys: list[Vec]) -> Vec:
    for k in keys:
        if len(k) != len(b):
            raise ExecutionError("unique: key column length differs from the bit vector")
    bits = kernels.unique_first(b.data, _canonical_keys(keys, len(b)))
    return Vec(np.asarray(bits, dtype=np.bool_), "bool", _dom(b, *keys))


def op_shuffle(m: _Machine, group: list[Vec]) -> tuple[Vec, ...]:
    if not group:
        return ()
    n = len(group[0])
    if any(len(v) != n for v in group):
        raise ExecutionError("shuffle: columns differ in length")
    perm = m.rng.permutation(n)
    return tuple(Vec(v.data[perm], v.type, v.domain) for v in group)


def op_concat(m: _Machine, *groups: list[Vec]) -> tuple[Vec, ...]:
    out = []
    for g in groups:
        types = {v.type for v in g}
        if len(types) > 1:
            raise ExecutionError(f"concat of differently typed vectors {sorted(types)}")
        typ = types.pop() if types else "bool"
        data = np.concatenate([v.data for v in g]) if g else np.zeros(0, _DTYPE[typ])
        out.append(Vec(data, typ, _dom(*g)))
    return tuple(out)


def _member_view(vs: Sequence[Vec], n: int) -> tuple[np.ndarray, np.ndarray]:
    ints, floats = [], []
    for v in vs:
        d = np.broadcast_to(v.data, (n,))
        ints.append(d.astype(np.int64) if v.type != "float" else np.zeros(n, np.int64))
        floats.append(d.astype(np.float64))
    if not vs:
        return np.zeros((n, 0), np.int64), np.zeros((n, 0), np.float64)
    return (np.ascontiguousarray(np.stack(ints, axis=1)),
            np.ascontiguousarray(np.stack(floats, axis=1)))


def op_member(m: _Machine, table_cols: list[Vec], mask: Vec, keys: list[Vec]) -> Vec:
    """Per key row: does some masked table row equal it on every column?"""
    if len(table_cols) != len(keys):
        raise ExecutionError("member: key arity differs from the table columns")
    lengths = {len(k) for k in keys} - {1}
    if len(lengths) > 1:
        raise ExecutionError(f"member: key columns of lengths {sorted(lengths)}")
    n_keys = lengths.pop() if lengths else 1
    n_rows = len(mask)
    rows = np.flatnonzero(mask.data)
    tol = np.array([t.type == "float" or k.type == "float" for t, k in zip(table_cols, keys)],
                   dtype=np.bool_)
    for t, k in zip(table_cols, keys):
        if (t.type == "string") != (k.type == "string"):
            raise ExecutionError("member: string compared with a number")
    ti, tf = _member_view(table_cols, n_rows)
    ki, kf = _member_view(keys, n_keys)
    hit = kernels.member(ki, kf, np.ascontiguousarray(ti[rows]), np.ascontiguousarray(tf[rows]), tol)
    return Vec(np.asarray(hit, dtype=np.bool_), "bool", _dom(mask, *table_cols, *keys))


def op_ones(m: _Machine, x: Vec) -> Vec:
    return Vec(np.ones(len(x), dtype=np.bool_), "bool", "public")


def op_broadcast(m: _Machine, x: Vec, like: Vec) -> Vec:
    if len(x) == len(like):
        return x
    if len(x) != 1:
        raise ExecutionError(f"cannot broadcast a vector of length {len(x)} to {len(like)}")
    return Vec(np.repeat(x.data, len(like)), x.type, x.domain)


def op_empty(m: _Machine, typ: str) -> Vec:
    return Vec(np.zeros(0, dtype=_DTYPE[typ]), typ, "public")


def op_pow(m: _Machine, a: Vec, b: Vec) -> Vec:
    _num(a, "pow"); _num(b, "pow")
    _same_len(a, b)
    return _vec(vecops.power(a.data, b.data), "float", _dom(a, b))


def op_sqrt(m: _Machine, a: Vec) -> Vec:
    _num(a, "sqrt")
    return _vec(vecops.sqrt(a.data), "float", a.domain)


def op_cast_float(m: _Machine, a: Vec) -> Vec:
    _num(a, "cast_float")
    return _vec(a.data.astype(np.float64), "float", a.domain)


def _masked(y: Vec, b: Vec) -> np.ndarray:
    if len(y) != len(b):
        raise ExecutionError("aggregation: value and bit vectors differ in length")
    return b.data.astype(np.bool_)


def op_sum_masked(m: _Machine, y: Vec, b: Vec) -> tuple[Vec, Vec]:
    _num(y, "sum")
    mask = _masked(y, b)
    dom = _dom(y, b)
    if y.type == "int":
        total = int(np.sum(y.data * mask.astype(np.int64), dtype=np.int64))
    else:
        # multiply-by-bit would turn a masked inf into NaN; select instead
        total = interp.sum_values(np.where(mask, y.data, 0.0).tolist())
    return _vec([total], y.type, dom), _vec([True], "bool", dom)


def op_count_masked(m: _Machine, y: Vec, b: Vec) -> tuple[Vec, Vec]:
    mask = _masked(y, b)
    return _vec([int(mask.sum())], "int", b.domain), _vec([True], "bool", b.domain)


def _extreme(y: Vec, b: Vec, smallest: bool) -> tuple[Vec, Vec]:
    _num(y, "min/max")
    mask = _masked(y, b)
    dom = _dom(y, b)
    ok = bool(mask.any())
    if y.type == "int":
        sentinel = INT64_MAX if smallest else INT64_MIN
        vals = np.where(mask, y.data, sentinel)
        v = int(vals.min() if smallest else vals.max()) if len(vals) else sentinel
    else:
        sentinel = math.inf if smallest else -math.inf
        vals = np.where(mask, y.data, sentinel)
        v = float(vals.min() if smallest else vals.max()) if len(vals) else sentinel
    return _vec([v], y.type, dom), _vec([ok], "bool", dom)


def op_min_masked(m: _Machine, y: Vec, b: Vec) -> tuple[Vec, Vec]:
    return _extreme(y, b, True)


def op_max_masked(m: _Machine, y: Vec, b: Vec) -> tuple[Vec, Vec]:
    return _extreme(y, b, False)


BUILTINS: dict[str, Callable] = {
    "getTable": op_get_table,
    "join": op_join,
    "argument": op_argument,
    "declassify": op_declassify,
    "publish": op_publish,
    "filter": op_filter,
    "unique": op_unique,
    "shuffle": op_shuffle,
    "concat": op_concat,
    "member": op_member,
    "ones": op_ones,
    "broadcast": op_broadcast,
    "empty": op_empty,
    "pow": op_pow,
    "sqrt": op_sqrt,
    "cast_float": op_cast_float,
    "sum_masked": op_sum_masked,
    "count_masked": op_count_masked,
    "min_masked": op_min_masked,
    "max_masked": op_max_masked,
}


class Blackbox:
    """The primitive operations on their own, outside any program.

    `bb.shuffle([x, y])` calls the builtin with this instance's random
    stream and leak log; `bb.vec` builds operands.
    """

    def __init__(self, seed: int | None = 0):
        empty = ir.CoreProgram((), ir.GoalMeta("", (), ()), (), ())
        self._m = _Machine(empty, Database(), {}, seed)

    @staticmethod
    def vec(data, typ: str, domain: str = "private") -> Vec:
        return _vec(data, typ, domain)

    @property
    def leak_log(self) -> LeakLog:
        return self._m.log

    def binop(self, op: str, a: Vec, b: Vec) -> Vec:
        return binop(op, a, b)

    def __getattr__(self, name: str):
        try:
            op = BUILTINS[name]
        except KeyError:
            raise AttributeError(name) from None
        return lambda *args: op(self._m, *args)


# ------------------------------------------------------------------- run


def string_dictionary(prog: ir.CoreProgram, db: Database,
                      args: Mapping[str, object] = ()) -> dict[int, str]:
    """CRC32 -> string for every string the run could publish."""
    pool = set(db.strings()) | set(prog.strings)
    pool |= {str(v) for v in dict(args).values()}
    pool |= {i.value for i in prog.goal.inputs if i.kind == "const" and isinstance(i.value, str)}
    return {kernels.crc32(s.encode("utf-8")): s for s in sorted(pool)}


def _decode(values: Iterable, typ: str, strings: Mapping[int, str]) -> list:
    out = []
    for v in values:
        if typ == "string":
            out.append(strings.get(int(v), f"<crc32:{int(v):08x}>"))
        elif typ == "int":
            out.append(int(v))
        elif typ == "float":
            out.append(float(v))
        else:
            out.append(bool(v))
    return out


def run(prog: ir.CoreProgram, db: Database, args: Mapping[str, object] | None = None,
        seed: int | None = 0) -> RunResult:
    """Execute `main`; returns the decoded published outputs and the leak log."""
    args = dict(args or {})
    m = _Machine(prog, db, args, seed)
    m.exec_block(prog.main, {}, {})
    strings = string_dictionary(prog, db, args)
    goal = prog.goal
    published: dict[str, list] = {}
    agg_value: object = None
    agg_name = None
    for name, (vec, present) in m.published.items():
        vals = _decode(vec.data.tolist(), vec.type, strings)
        if present is not None:
            agg_name = name
            agg_value = vals[0] if bool(present.data.all()) and vals else interp.EmptyAggregate
        published[name] = vals
    cols = tuple(o.name for o in goal.outputs)
    if goal.aggregate is not None and agg_name is None:
        raise ExecutionError("program did not publish its aggregate")
    return RunResult(cols, published, m.log, agg_value, agg_name)
