import json

import pytest

from privalog.cli import (
    EXIT_COMPILE,
    EXIT_MISMATCH,
    EXIT_OK,
    EXIT_RUNTIME,
    EXIT_USAGE,
    main,
    parse_args_kv,
)
from privalog.simexec import LeakLog

from conftest import EXAMPLES

SHIP = str(EXAMPLES / "ship_mintime.pl")
FIB = str(EXAMPLES / "fib.pl")
DB = str(EXAMPLES / "ship_db")
ARGS = ["--arg", "portname=alma", "--arg", "cargotype=carrot"]


def _json(capsys):
    return json.loads(capsys.readouterr().out.strip().splitlines()[-1])


def test_compile_run_and_eval_ref(tmp_path, capsys):
    out = tmp_path / "ship.ir"
    leak = tmp_path / "leak.jsonl"
    assert main(["compile", SHIP, "-o", str(out)]) == EXIT_OK
    assert out.read_text().startswith("(table ship")
    assert main(["run", str(out), "--db", DB, *ARGS, "--seed", "4", "--leak-log", str(leak)]) == EXIT_OK
    run = _json(capsys)
    assert run["aggregate"] == "MinTime" and run["value"] == pytest.approx(9.905806378079474)
    assert [e.kind for e in LeakLog.read(leak).events] == ["declassify", "publish"]
    assert main(["eval-ref", SHIP, "--db", DB, *ARGS]) == EXIT_OK
    assert _json(capsys)["value"] == run["value"]


def test_compile_dumps_and_side_outputs(tmp_path, capsys):
    sc, smt = tmp_path / "p.sc", tmp_path / "smt"
    code = main(["compile", SHIP, "--dump-adorned", "--dump-dnf", "--dump-rulebase",
                 "--emit-secrec", str(sc), "--emit-smtlib", str(smt)])
    assert code == EXIT_OK
    text = capsys.readouterr().out
    assert "% adorned" in text and "% DNF split" in text and "% inlined rule base" in text
    assert sc.exists() and list(smt.glob("*.smt2"))


def test_check_pass_and_fail(tmp_path, capsys):
    assert main(["check", SHIP, "--db", DB, *ARGS]) == EXIT_OK
    assert capsys.readouterr().out.startswith("PASS")
    ir_path = tmp_path / "ship.ir"
    main(["compile", SHIP, "-o", str(ir_path)])
    text = ir_path.read_text()
    corrupted = text.replace("(const int 2)))) (var r0_3)", "(const int 2)))) (const int 20)")
    assert corrupted != text
    ir_path.write_text(corrupted)
    capsys.readouterr()
    assert main(["check", SHIP, "--db", DB, *ARGS, "--ir", str(ir_path)]) == EXIT_MISMATCH
    out = capsys.readouterr().out
    assert out.startswith("FAIL") and "reference aggregate" in out


def test_check_plain_goal_with_unfold_options(capsys):
    code = main(["check", FIB, "--arg", "n=8", "--max-unfold", "10", "--unfold-strategy", "full",
                 "--no-merge-keys"])
    assert code == EXIT_OK
    assert "1 published, 1 reference" in capsys.readouterr().out


def test_usage_errors(capsys):
    assert main([]) == EXIT_USAGE
    assert main(["bogus"]) == EXIT_USAGE
    assert main(["run", "nosuch.ir", "--db", DB]) == EXIT_USAGE
    assert main(["check", SHIP, "--db", DB, "--arg", "oops"]) == EXIT_USAGE
    assert main(["eval-ref", SHIP]) == EXIT_USAGE  # tables but no --db
    assert main(["compile", SHIP, "--max-unfold", "-1"]) == EXIT_USAGE


def test_compile_errors(tmp_path):
    bad = tmp_path / "bad.pl"
    bad.write_text("p(X) :- q(X). ?-p(X).")
    assert main(["compile", str(bad)]) == EXIT_COMPILE
    bad.write_text("p(X :- .")
    assert main(["check", str(bad)]) == EXIT_COMPILE
    junk = tmp_path / "junk.ir"
    junk.write_text("(garbage")
    assert main(["run", str(junk), "--db", DB]) == EXIT_COMPILE


def test_runtime_errors(tmp_path):
    out = tmp_path / "ship.ir"
    main(["compile", SHIP, "-o", str(out)])
    assert main(["run", str(out), "--db", DB, "--arg", "portname=alma"]) == EXIT_RUNTIME
    assert main(["run", str(out), "--db", str(tmp_path / "none"), *ARGS]) == EXIT_RUNTIME


def test_gen_and_check_corpus(tmp_path, capsys):
    assert main(["gen-corpus", "--seed", "3", "--count", "12", "-o", str(tmp_path)]) == EXIT_OK
    assert len(list(tmp_path.glob("fixture_*/program.pl"))) == 12
    capsys.readouterr()
    assert main(["check-corpus", str(tmp_path), "--jobs", "2", "-q"]) == EXIT_OK
    assert "12/12 fixtures passed" in capsys.readouterr().out


def test_check_corpus_reports_failures(tmp_path, capsys):
    main(["gen-corpus", "--seed", "3", "--count", "2", "-o", str(tmp_path)])
    (tmp_path / "fixture_0001" / "program.pl").write_text("p(X) :- .")
    capsys.readouterr()
    assert main(["check-corpus", str(tmp_path), "--jobs", "1"]) == EXIT_MISMATCH
    assert "1/2 fixtures passed" in capsys.readouterr().out


def test_parse_args_kv():
    assert parse_args_kv(["a=1", "@b= x=y"]) == {"a": "1", "b": " x=y"}
