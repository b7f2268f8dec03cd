import json

import pytest

from privalog.corpus import MAX_ROWS, MAX_RULES, gen_corpus, generate_fixture, load_fixture, write_corpus
from privalog.datastore import load_database, parse_cell, save_database
from privalog.errors import DataError
from privalog.parser import parse
from privalog.refeval import eval_program
from privalog.relation import Database
from privalog.unfold import unfold_program
from privalog.adorn import adorn

from conftest import EXAMPLES

SCHEMA = parse(":-type(t(k:private int, v:public float, s:private string)).\n"
               ":-primary_key(t, k).\np(K) :- t(K,_,_).\n?-p(K).").schemas


# ------------------------------------------------------------ datastore

def test_database_round_trip(tmp_path):
    db = Database.from_rows(SCHEMA, {"t": [(1, 0.1, "a,b"), (-2, 1e300, 'q"uote')]})
    save_database(db, tmp_path)
    back = load_database(tmp_path, SCHEMA)
    assert back["t"].rows == db["t"].rows
    assert back["t"].primary_key == 0
    manifest = json.loads((tmp_path / "t.json").read_text())
    assert manifest["rows"] == 2 and manifest["primary_key"] == "k"


def test_load_without_schemas_reads_every_manifest():
    db = load_database(EXAMPLES / "ship_db")
    assert set(db) == {"ship", "port"} and len(db["ship"]) == 2


@pytest.mark.parametrize("text, dtype, want", [
    ("42", "int", 42), (" -7 ", "int", -7), ("2.5", "float", 2.5), ("1e3", "float", 1000.0),
    (" x ", "string", " x "),
])
def test_parse_cell(text, dtype, want):
    assert parse_cell(text, dtype) == want


@pytest.mark.parametrize("text, dtype", [("4.0", "int"), ("99999999999999999999", "int"),
                                         ("nan", "float"), ("abc", "float")])
def test_parse_cell_rejects(text, dtype):
    with pytest.raises(ValueError):
        parse_cell(text, dtype)


def test_bad_cell_and_row_count_are_data_errors(tmp_path):
    db = Database.from_rows(SCHEMA, {"t": [(1, 0.5, "a")]})
    save_database(db, tmp_path)
    csv = tmp_path / "t.csv"
    csv.write_text("k,v,s\nx,0.5,a\n")
    with pytest.raises(DataError, match="column k"):
        load_database(tmp_path, SCHEMA)
    csv.write_text("k,v,s\n1,0.5,a\n2,0.5,b\n")
    with pytest.raises(DataError, match="manifest says 1 rows"):
        load_database(tmp_path, SCHEMA)


def test_schema_mismatch_is_reported(tmp_path):
    save_database(Database.from_rows(SCHEMA, {}), tmp_path)
    other = parse(":-type(t(k:private int, v:public int, s:private string)).\n"
                  "p(K) :- t(K,_,_).\n?-p(K).").schemas
    with pytest.raises(DataError):
        load_database(tmp_path, other)


def test_relation_checks_cell_types():
    with pytest.raises(DataError):
        Database.from_rows(SCHEMA, {"t": [("one", 0.5, "a")]})
    rel = Database.from_rows(SCHEMA, {"t": [(1, 2, "a")]})["t"]
    assert rel.rows == ((1, 2.0, "a"),) and isinstance(rel.rows[0][1], float)


def test_key_violations():
    rel = Database.from_rows(SCHEMA, {"t": [(1, 0.5, "a"), (1, 0.7, "b"), (2, 0.5, "a")]})["t"]
    assert rel.key_violations() == [1]


# --------------------------------------------------------------- corpus

def test_fixture_is_independent_of_count():
    assert generate_fixture(1, 3).source == gen_corpus(1, 5)[3].source


def test_corpus_respects_size_limits(corpus):
    for f in corpus:
        assert len(f.program.clauses) <= MAX_RULES + 1
        assert len(f.program.schemas) <= 2
        assert all(len(r) <= MAX_ROWS for r in f.db.values())
        assert all(not r.key_violations() for r in f.db.values())


def test_corpus_programs_reach_a_fixpoint(corpus):
    for f in corpus[:60]:
        assert unfold_program(adorn(f.program)).fixpoint, f.name


def test_corpus_mixes_features(corpus):
    srcs = [f.source for f in corpus]
    assert sum("\\+" in s for s in srcs) > 10
    assert sum("?-" in s and "(" in s.split("?-")[1].split(",")[0] and
               s.split("?-")[1][:3] in ("min", "max", "sum", "cou") for s in srcs) > 10
    assert sum("r(N" in s for s in srcs) > 5
    assert sum(bool(eval_program(f.program, f.db, f.args).rows) for f in corpus) > 50


def test_write_and_load_fixture(tmp_path):
    (path,) = write_corpus(tmp_path, 2, 1)
    text, dbdir, args = load_fixture(path)
    program = parse(text)
    db = load_database(dbdir, program.schemas)
    f = generate_fixture(2, 0)
    assert args == f.args
    assert eval_program(program, db, args) == eval_program(f.program, f.db, f.args)
