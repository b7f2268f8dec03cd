"""Command line interface: `privalog compile|run|eval-ref|check|gen-corpus|check-corpus`.

Exit codes: 0 success (or answers equal), 1 answer mismatch, 2 usage error,
3 compile error (including malformed IR), 4 runtime error.
"""

from __future__ import annotations

import argparse
import json
import logging
import math
import os
import re
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

from . import __version__, interp, ir, simexec
from .codegen import CompileOptions, Compilation, compile_program, to_secrec
from .corpus import load_fixture, write_corpus
from .datastore import load_database
from .errors import (
    CompileError,
    DataError,
    EvaluationError,
    ExecutionError,
    IRError,
    ParseError,
    PrivaLogError,
    ValidationError,
)
from .parser import parse
from .prune import emit_smtlib
from .refeval import Answer, eval_program
from .relation import Database
from .unfold import DEFAULT_MAX_UNFOLD, STRATEGIES

EXIT_OK, EXIT_MISMATCH, EXIT_USAGE, EXIT_COMPILE, EXIT_RUNTIME = 0, 1, 2, 3, 4

log = logging.getLogger("privalog")


class UsageError(Exception):
    pass


def exit_code_for(e: BaseException) -> int:
    if isinstance(e, UsageError):
        return EXIT_USAGE
    if isinstance(e, (ParseError, ValidationError, CompileError, IRError)):
        return EXIT_COMPILE
    return EXIT_RUNTIME


# ---------------------------------------------------------------- arguments

_INT = re.compile(r"[+-]?\d+")


def parse_args_kv(items: Sequence[str]) -> dict[str, str]:
    out: dict[str, str] = {}
    for item in items or ():
        if "=" not in item:
            raise UsageError(f"--arg expects name=value, got {item!r}")
        k, v = item.split("=", 1)
        k = k.strip().lstrip("@")
        if not k:
            raise UsageError(f"--arg has an empty name: {item!r}")
        out[k] = v
    return out


def literal_value(text: str) -> object:
    """Best guess for an untyped argument: int, then float, then string."""
    s = text.strip()
    if _INT.fullmatch(s):
        return int(s)
    try:
        f = float(s)
    except ValueError:
        return text
    return f if math.isfinite(f) else text


def typed_args(core: ir.CoreProgram, raw: Mapping[str, object]) -> dict[str, object]:
    """Client arguments converted to the parameter types the compiler inferred."""
    types = {i.value: i.type for i in core.goal.inputs if i.kind == "param"}
    out: dict[str, object] = {}
    for k, v in raw.items():
        out[k] = simexec.coerce_arg(v, types[k]) if k in types else v
    return out


# ------------------------------------------------------------------ output


def _json_value(v):
    if v is interp.EmptyAggregate:
        return None
    if isinstance(v, float) and not math.isfinite(v):
        return repr(v)
    return v


def format_rows(columns: Sequence[str], rows) -> str:
    body = sorted((tuple(_json_value(x) for x in r) for r in rows), key=repr)
    return json.dumps({"columns": list(columns), "rows": [list(r) for r in body]})


def format_aggregate(name: str, value) -> str:
    return json.dumps({"aggregate": name, "value": _json_value(value),
                       "empty": value is interp.EmptyAggregate})


def format_answer(a: Answer, result_name: str | None) -> str:
    if a.is_aggregate:
        return format_aggregate(result_name or "result", a.aggregate)
    return format_rows(a.columns, a.rows)


def format_run(r: simexec.RunResult) -> str:
    if r.is_aggregate:
        return format_aggregate(r.aggregate_name or "result", r.aggregate)
    return format_rows(r.columns, r.rows)


# ------------------------------------------------------------------- check


@dataclass
class CheckReport:
    passed: bool
    published: list = field(default_factory=list)
    reference: list = field(default_factory=list)
    only_published: list = field(default_factory=list)
    only_reference: list = field(default_factory=list)
    aggregate: tuple | None = None  # (published, reference)
    notes: list[str] = field(default_factory=list)

    def render(self) -> str:
        lines = ["PASS" if self.passed else "FAIL"]
        if self.aggregate is not None:
            pub, ref = self.aggregate
            lines.append(f"  published aggregate: {pub!r}")
            lines.append(f"  reference aggregate: {ref!r}")
        else:
            lines.append(f"  answers: {len(self.published)} published, {len(self.reference)} reference")
        for r in self.only_published:
            lines.append(f"  + published only: {r!r}")
        for r in self.only_reference:
            lines.append(f"  - reference only: {r!r}")
        lines += [f"  note: {n}" for n in self.notes]
        return "\n".join(lines)


def leak_problems(result: simexec.RunResult, answer: Answer) -> list[str]:
    """Violations of the declassification discipline seen in one run."""
    out = []
    decl = result.leak_log.of_kind("declassify")
    if len(decl) != 1:
        out.append(f"{len(decl)} declassify events, expected exactly one")
    elif not answer.is_aggregate:
        bits = decl[0].values
        if sum(1 for b in bits if b) != len(answer.rows):
            out.append(f"declassified bit vector has {sum(1 for b in bits if b)} true bits, "
                       f"the answer set has {len(answer.rows)} rows")
    return out


def cmd_check(program_text: str, db: Database | None, args: Mapping[str, object] | None = None,
              seed: int = 0, options: CompileOptions | None = None,
              core: ir.CoreProgram | None = None) -> CheckReport:
    """Compile, simulate, evaluate with the reference semantics, and compare.

    `db` may be None to load nothing (programs without tables).  A
    precompiled `core` replaces the compiled program (used to check a
    hand-edited IR file against its source).
    """
    opts = options or CompileOptions()
    program = parse(program_text)
    comp = compile_program(program, opts)
    prog = core if core is not None else comp.core
    if db is None:
        db = Database.from_rows(program.schemas, {})
    targs = typed_args(prog, dict(args or {}))
    result = simexec.run(prog, db, targs, seed)
    answer = eval_program(program, db, targs, max_iter=opts.max_unfold)
    notes = []
    if opts.merge_keys:
        for rel in db.values():
            bad = rel.key_violations()
            if bad:
                notes.append(f"table {rel.name} repeats primary key values {sorted(bad, key=repr)[:5]}; "
                             "merging keyed atoms assumed they were unique")
    if not comp.rulebase.fixpoint:
        notes.append(f"unfolding stopped at the bound {opts.max_unfold} without a fixpoint")
    problems = leak_problems(result, answer)
    notes += problems
    if answer.is_aggregate:
        ok = interp.values_match(result.aggregate, answer.aggregate)
        return CheckReport(ok and not problems, aggregate=(result.aggregate, answer.aggregate),
                           notes=notes)
    eq, only_pub, only_ref = interp.answer_sets_match(result.rows, answer.rows)
    return CheckReport(eq and not problems, sorted(result.rows, key=repr),
                       sorted(answer.rows, key=repr), only_pub, only_ref, None, notes)


def _check_fixture(job: tuple[str, int, dict]) -> tuple[str, bool, str]:
    path, seed, opt = job
    try:
        text, dbdir, args = load_fixture(path)
        program = parse(text)
        db = load_database(dbdir, program.schemas)
        rep = cmd_check(text, db, args, seed, CompileOptions(**opt))
        return path, rep.passed, rep.render()
    except PrivaLogError as e:
        return path, False, f"ERROR [{e.stage}] {e}"


def check_corpus(directory: str | Path, seed: int = 0, jobs: int = 1,
                 options: CompileOptions | None = None) -> list[tuple[str, bool, str]]:
    dirs = sorted(str(p) for p in Path(directory).iterdir() if (p / "program.pl").exists())
    o = options or CompileOptions()
    opt = {"max_unfold": o.max_unfold, "strategy": o.strategy, "prune": o.prune,
           "merge_keys": o.merge_keys}
    work = [(d, seed, opt) for d in dirs]
    if jobs <= 1:
        return [_check_fixture(w) for w in work]
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(_check_fixture, work, chunksize=8))


# ------------------------------------------------------------------ parser


def _compile_flags(p: argparse.ArgumentParser) -> None:
    p.add_argument("--max-unfold", type=int, default=DEFAULT_MAX_UNFOLD, metavar="N",
                   help="unfolding (and reference iteration) bound, default %(default)s")
    p.add_argument("--unfold-strategy", choices=STRATEGIES, default="full")
    p.add_argument("--no-prune", action="store_true", help="keep inconsistent rules")
    p.add_argument("--no-merge-keys", action="store_true",
                   help="do not merge atoms that share a primary key")


def _options(a: argparse.Namespace) -> CompileOptions:
    if a.max_unfold < 0:
        raise UsageError("--max-unfold must be non-negative")
    return CompileOptions(max_unfold=a.max_unfold, strategy=a.unfold_strategy,
                          prune=not a.no_prune, merge_keys=not a.no_merge_keys)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="privalog", description="PrivaLog compiler and harness")
    ap.add_argument("--version", action="version", version=f"privalog {__version__}")
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    c = sub.add_parser("compile", help="compile a program to core IR")
    c.add_argument("program")
    c.add_argument("-o", "--output", help="IR output file (default: stdout)")
    _compile_flags(c)
    c.add_argument("--dump-adorned", action="store_true")
    c.add_argument("--dump-dnf", action="store_true")
    c.add_argument("--dump-rulebase", action="store_true")
    c.add_argument("--emit-secrec", metavar="FILE", help="write SecreC-like text (cosmetic)")
    c.add_argument("--emit-smtlib", metavar="DIR", help="write one SMT-LIB query per rule")

    r = sub.add_parser("run", help="execute core IR on the simulated blackbox")
    r.add_argument("ir")
    r.add_argument("--db", required=True)
    r.add_argument("--arg", action="append", default=[], metavar="K=V")
    r.add_argument("--seed", type=int, default=0)
    r.add_argument("--leak-log", metavar="FILE", help="write the leak log as JSON lines")

    e = sub.add_parser("eval-ref", help="evaluate with the reference semantics")
    e.add_argument("program")
    e.add_argument("--db")
    e.add_argument("--arg", action="append", default=[], metavar="K=V")
    e.add_argument("--max-iter", type=int, default=DEFAULT_MAX_UNFOLD)

    k = sub.add_parser("check", help="compile, run, evaluate and compare")
    k.add_argument("program")
    k.add_argument("--db")
    k.add_argument("--arg", action="append", default=[], metavar="K=V")
    k.add_argument("--seed", type=int, default=0)
    k.add_argument("--ir", help="use this IR file instead of the compiled one")
    k.add_argument("--leak-log", metavar="FILE")
    _compile_flags(k)

    g = sub.add_parser("gen-corpus", help="write random fixtures")
    g.add_argument("--seed", type=int, default=1)
    g.add_argument("--count", type=int, default=200)
    g.add_argument("-o", "--output", required=True)

    cc = sub.add_parser("check-corpus", help="run check on every fixture in a directory")
    cc.add_argument("directory")
    cc.add_argument("--seed", type=int, default=0)
    cc.add_argument("--jobs", type=int, default=min(8, os.cpu_count() or 1))
    cc.add_argument("-q", "--quiet", action="store_true", help="only print failures")
    _compile_flags(cc)
    return ap


# ---------------------------------------------------------------- commands


def _load_program(path: str):
    try:
        return parse(Path(path).read_text())
    except OSError as e:
        raise UsageError(f"cannot read {path}: {e}") from None


def _db(path: str | None, schemas) -> Database:
    if path is None:
        if schemas:
            raise UsageError("the program declares tables; pass --db DIR")
        return Database()
    return load_database(path, schemas)


def _do_compile(a) -> int:
    program = _load_program(a.program)
    comp: Compilation = compile_program(program, _options(a))
    if a.dump_dnf:
        print("% DNF split\n" + comp.dump_dnf())
    if a.dump_adorned:
        print("% adorned\n" + comp.dump_adorned())
    if a.dump_rulebase:
        print("% inlined rule base\n" + comp.dump_rulebase())
    text = ir.format_program(comp.core)
    if a.output:
        Path(a.output).write_text(text)
    elif not (a.dump_adorned or a.dump_dnf or a.dump_rulebase):
        sys.stdout.write(text)
    if a.emit_secrec:
        Path(a.emit_secrec).write_text(to_secrec(comp.core))
    if a.emit_smtlib:
        emit_smtlib(comp.rulebase.rules, a.emit_smtlib)
    return EXIT_OK


def _do_run(a) -> int:
    try:
        core = ir.parse_program(Path(a.ir).read_text())
    except OSError as e:
        raise UsageError(f"cannot read {a.ir}: {e}") from None
    ir.check_program(core)
    schemas = _schemas_of(core)
    db = load_database(a.db, schemas)
    args = typed_args(core, parse_args_kv(a.arg))
    res = simexec.run(core, db, args, a.seed)
    if a.leak_log:
        res.leak_log.write(a.leak_log)
    print(format_run(res))
    return EXIT_OK


def _schemas_of(core: ir.CoreProgram):
    from .ast import Column, SchemaDecl

    return [SchemaDecl(t.name, tuple(Column(c.name, c.domain, c.type) for c in t.columns))
            for t in core.tables]


def _do_eval(a) -> int:
    program = _load_program(a.program)
    raw = parse_args_kv(a.arg)
    try:
        args = typed_args(compile_program(program).core, raw)
    except CompileError:
        args = {k: literal_value(v) for k, v in raw.items()}
    db = _db(a.db, program.schemas)
    ans = eval_program(program, db, args, max_iter=a.max_iter)
    agg = program.goal.aggregation
    print(format_answer(ans, agg.result if agg else None))
    return EXIT_OK


def _do_check(a) -> int:
    text = Path(a.program).read_text()
    program = parse(text)
    core = None
    if a.ir:
        core = ir.parse_program(Path(a.ir).read_text())
        ir.check_program(core)
    db = _db(a.db, program.schemas)
    rep = cmd_check(text, db, parse_args_kv(a.arg), a.seed, _options(a), core)
    print(rep.render())
    return EXIT_OK if rep.passed else EXIT_MISMATCH


def _do_gen(a) -> int:
    if a.count < 0:
        raise UsageError("--count must be non-negative")
    paths = write_corpus(a.output, a.seed, a.count)
    print(f"wrote {len(paths)} fixtures to {a.output}")
    return EXIT_OK


def _do_check_corpus(a) -> int:
    t0 = time.perf_counter()
    results = check_corpus(a.directory, a.seed, a.jobs, _options(a))
    failed = 0
    for path, ok, text in results:
        if not ok:
            failed += 1
        if not ok or not a.quiet:
            print(f"{Path(path).name}: {text.splitlines()[0]}")
            if not ok:
                print("\n".join(text.splitlines()[1:]))
    dt = time.perf_counter() - t0
    print(f"{len(results) - failed}/{len(results)} fixtures passed in {dt:.1f} s")
    return EXIT_OK if failed == 0 else EXIT_MISMATCH


_COMMANDS = {"compile": _do_compile, "run": _do_run, "eval-ref": _do_eval, "check": _do_check,
             "gen-corpus": _do_gen, "check-corpus": _do_check_corpus}


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        a = parser.parse_args(argv)
    except SystemExit as e:
        return int(e.code or 0)
    logging.basicConfig(level=logging.INFO if a.verbose else logging.WARNING,
                        format="%(levelname)s: %(message)s")
    try:
        return _COMMANDS[a.command](a)
    except UsageError as e:
        print(f"privalog: {e}", file=sys.stderr)
        return EXIT_USAGE
    except PrivaLogError as e:
        print(f"privalog: {e.stage} error: {e}", file=sys.stderr)
        return exit_code_for(e)
    except OSError as e:
        print(f"privalog: {e}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
