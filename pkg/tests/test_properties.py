"""Property-based checks with hypothesis."""

import numpy as np
from hypothesis import given, settings
from hypothesis import strategies as st

from privalog import interp, kernels
from privalog.ast import BinOp, Const, Var
from privalog.cli import cmd_check
from privalog.corpus import generate_fixture
from privalog.parser import format_term, parse_term

names = st.sampled_from(["X", "Y", "Speed", "X_1"])
leaves = st.one_of(names.map(Var), st.integers(-10**6, 10**6).map(Const),
                   st.floats(0, 1e6, allow_nan=False).map(Const))
terms = st.recursive(
    leaves,
    lambda sub: st.builds(BinOp, st.sampled_from(["+", "-", "*", "/", "^"]), sub, sub),
    max_leaves=8,
)


@given(terms)
def test_term_format_parse_round_trip(t):
    assert parse_term(format_term(t)) == t


@given(st.text(max_size=40))
def test_crc32_backends_agree(s):
    data = s.encode("utf-8")
    values = {mod.crc32(data) for mod in kernels.backends().values()}
    values |= {int(mod.crc32_many([s])[0]) for mod in kernels.backends().values()}
    assert len(values) == 1


@given(st.lists(st.tuples(st.booleans(), st.integers(0, 3), st.integers(0, 3)), max_size=12))
def test_unique_first_matches_brute_force(rows):
    bits = np.array([r[0] for r in rows], dtype=bool)
    keys = np.array([[r[1], r[2]] for r in rows], dtype=np.int64).reshape(len(rows), 2)
    got = kernels.unique_first(bits, keys).tolist()
    seen, want = set(), []
    for b, *k in rows:
        want.append(b and tuple(k) not in seen)
        if b:
            seen.add(tuple(k))
    assert got == want


@given(st.floats(allow_nan=True), st.floats(allow_nan=True))
def test_values_match_is_symmetric(a, b):
    assert interp.values_match(a, b) == interp.values_match(b, a)
    assert interp.values_match(a, a)


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 10**6), st.integers(0, 10**4), st.integers(0, 2**31))
def test_compiled_program_agrees_with_reference(seed, index, run_seed):
    f = generate_fixture(seed, index)
    assert cmd_check(f.source, f.db, f.args, run_seed).passed
