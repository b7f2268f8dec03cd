from __future__ import annotations

from pathlib import Path

import pytest

from privalog.corpus import gen_corpus
from privalog.datastore import load_database
from privalog.parser import parse

EXAMPLES = Path(__file__).resolve().parents[1] / "src" / "privalog" / "examples"

# filled in by test_acceptance.py, printed after the run
ACCEPTANCE: dict[str, tuple[bool, str]] = {}


def example(name: str) -> str:
    return (EXAMPLES / name).read_text()


@pytest.fixture(scope="session")
def corpus():
    return gen_corpus(1, 200)


@pytest.fixture(scope="session")
def ship_db():
    program = parse(example("ship_mintime.pl"))
    return load_database(EXAMPLES / "ship_db", program.schemas)


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    tr = terminalreporter
    tr.section("acceptance criteria")
    for key in sorted(ACCEPTANCE, key=lambda k: int(k[1:])):
        ok, detail = ACCEPTANCE[key]
        tr.write_line(f"{key:>4} {'PASS' if ok else 'FAIL'}  {detail}")
