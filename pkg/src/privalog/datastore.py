"""Load and save EDB tables as CSV files with JSON manifests.

Layout of a database directory::

    DIR/<table>.csv    header row + one row per tuple
    DIR/<table>.json   {"name": ..., "columns": [{"name", "ptype", "dtype"}, ...],
                        "rows": N, "primary_key": "col" | null}

The manifest is authoritative for types; it must agree exactly with the
program's `:-type(...)` declaration.
"""

from __future__ import annotations

import csv
import json
import math
import re
from pathlib import Path
from typing import Iterable

from .ast import DTYPES, PTYPES, Column, SchemaDecl
from .errors import DataError
from .relation import Database, Relation

_INT_RE = re.compile(r"[+-]?\d+")
INT64_MIN = -(2**63)
INT64_MAX = 2**63 - 1


def parse_cell(text: str, dtype: str):
    """Parse one CSV cell; raises ValueError with a short reason."""
    if dtype == "string":
        return text
    s = text.strip()
    if dtype == "int":
        if not _INT_RE.fullmatch(s):
            raise ValueError(f"expected an int, got {text!r}")
        v = int(s)
        if not INT64_MIN <= v <= INT64_MAX:
            raise ValueError(f"int {v} outside 64-bit range")
        return v
    if dtype == "float":
        try:
            v = float(s)
        except ValueError:
            raise ValueError(f"expected a float, got {text!r}") from None
        if not math.isfinite(v):
            raise ValueError(f"non-finite float {text!r}")
        return v
    raise ValueError(f"unknown dtype {dtype}")


def format_cell(value, dtype: str) -> str:
    if dtype == "float":
        return repr(float(value))
    return str(value)


def read_manifest(path: Path) -> SchemaDecl:
    try:
        data = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as e:
        raise DataError(f"{path}: cannot read manifest: {e}") from None
    try:
        cols = []
        for c in data["columns"]:
            if c["ptype"] not in PTYPES or c["dtype"] not in DTYPES:
                raise DataError(f"{path}: bad column type {c}")
            cols.append(Column(c["name"], c["ptype"], c["dtype"]))
        names = [c.name for c in cols]
        pk = data.get("primary_key")
        pk_idx = None
        if pk is not None:
            if pk not in names:
                raise DataError(f"{path}: primary key {pk!r} is not a column")
            pk_idx = names.index(pk)
        return SchemaDecl(data["name"], tuple(cols), pk_idx)
    except (KeyError, TypeError) as e:
        raise DataError(f"{path}: malformed manifest ({e})") from None


def _check_against_schema(manifest: SchemaDecl, schema: SchemaDecl, where: Path) -> None:
    if manifest.pred != schema.pred:
        raise DataError(f"{where}: manifest names table {manifest.pred}, expected {schema.pred}")
    if manifest.arity != schema.arity:
        raise DataError(
            f"{where}: table {schema.pred} has {manifest.arity} columns, program declares {schema.arity}"
        )
    for i, (m, s) in enumerate(zip(manifest.columns, schema.columns)):
        if m != s:
            raise DataError(
                f"{where}: column {i} of {schema.pred} is "
                f"{m.name}:{m.ptype} {m.dtype}, program declares {s.name}:{s.ptype} {s.dtype}"
            )


def load_table(directory: Path, name: str, schema: SchemaDecl | None = None) -> Relation:
    directory = Path(directory)
    manifest_path = directory / f"{name}.json"
    csv_path = directory / f"{name}.csv"
    if not manifest_path.exists():
        raise DataError(f"unknown table {name}: {manifest_path} not found")
    manifest = read_manifest(manifest_path)
    if schema is not None:
        _check_against_schema(manifest, schema, manifest_path)
    rows: list[tuple] = []
    if csv_path.exists():
        with csv_path.open(newline="") as fh:
            reader = csv.reader(fh)
            header = next(reader, None)
            expected = [c.name for c in manifest.columns]
            if header is not None and header != expected:
                raise DataError(f"{csv_path}: header {header} does not match columns {expected}")
            for lineno, rec in enumerate(reader, start=2):
                if not rec:
                    continue
                if len(rec) != manifest.arity:
                    raise DataError(
                        f"{csv_path}: row {lineno} has {len(rec)} cells, expected {manifest.arity}"
                    )
                row = []
                for col, cell in zip(manifest.columns, rec):
                    try:
                        row.append(parse_cell(cell, col.dtype))
                    except ValueError as e:
                        raise DataError(f"{csv_path}: row {lineno}, column {col.name}: {e}") from None
                rows.append(tuple(row))
    declared = json.loads(manifest_path.read_text()).get("rows")
    if declared is not None and declared != len(rows):
        raise DataError(f"{csv_path}: manifest says {declared} rows, file has {len(rows)}")
    pk = schema.primary_key if schema is not None else manifest.primary_key
    return Relation.build(name, manifest.columns, rows, pk)


def load_database(directory: str | Path, schemas: Iterable[SchemaDecl] | None = None) -> Database:
    """Load the tables of `schemas` (or every manifest in the directory)."""
    directory = Path(directory)
    if not directory.is_dir():
        raise DataError(f"database directory {directory} does not exist")
    if schemas is None:
        return Database(load_table(directory, p.stem) for p in sorted(directory.glob("*.json")))
    return Database(load_table(directory, s.pred, s) for s in schemas)


def save_table(rel: Relation, directory: str | Path) -> None:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    manifest = {
        "name": rel.name,
        "columns": [{"name": c.name, "ptype": c.ptype, "dtype": c.dtype} for c in rel.columns],
        "rows": len(rel.rows),
        "primary_key": None if rel.primary_key is None else rel.columns[rel.primary_key].name,
    }
    (directory / f"{rel.name}.json").write_text(json.dumps(manifest, indent=2) + "\n")
    with (directory / f"{rel.name}.csv").open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow([c.name for c in rel.columns])
        for r in rel.rows:
            w.writerow([format_cell(v, c.dtype) for v, c in zip(r, rel.columns)])


def save_database(db: Database, directory: str | Path) -> None:
    for rel in db.values():
        save_table(rel, directory)
