import math
from pathlib import Path

import numpy as np
import pytest
from hypothesis import given, strategies as st

from instances import instances, walkthrough
from wcspbound.oracle import brute_force_optimum
from wcspbound.wcspio import ParseError, emit_native, normalized_bound, parse_native, parse_wcsp_file

DATA = Path(__file__).parent / "data"

SMALL = """tiny 2 2 2 10
2 2
1 0 0 1
1 5
2 0 1 0 2
0 1 3
1 1 10
"""


def test_parse_costs_become_negated_weights():
    s, f = parse_wcsp_file(SMALL)
    assert s.scopes == ((0,), (0, 1))
    assert f[s.block(0)].tolist() == [0, -5]
    assert f[s.block(1)].tolist() == [0, -3, 0, -math.inf]
    assert parse_wcsp_file(SMALL.encode())[1].tolist() == f.tolist()


def test_max_weight_is_minus_min_cost():
    s, f = parse_wcsp_file(SMALL)
    # min cost 0 at (0,0)
    assert brute_force_optimum(s, f) == (0.0, [(0, 0)])


def test_walkthrough_fixture_matches_cost_file():
    s, f = parse_wcsp_file((DATA / "walkthrough_f1.wcsp").read_bytes())
    s1, f1 = walkthrough(1)
    assert s == s1
    assert f.tolist() == (f1 - 13).tolist()


@pytest.mark.parametrize(
    "doc, match",
    [
        ("x 3 2 1 10\n2 2 2\n3 0 1 2 0 0\n", "unsupported arity"),
        ("x 1 2 1 10\n2\n1 0 0 1\n2 5\n", "out of range"),
        ("x 1 2 1 10\n2\n1 0 0 2\n1 5\n1 4\n", "duplicate tuple"),
        ("x 1 2 1 10\n2\n1 0 0 0\nextra\n", "trailing data"),
        ("x 1 2 1 10\n2\n1 0 zero 0\n", "expected number"),
        ("x 1 2\n", "end of file"),
        ("x 1 2 1 10\n2\n1 3 0 0\n", "out of range"),
        ("x 2 2 1 10\n2 2\n2 0 0 0 0\n", "repeated variable"),
    ],
)
def test_parse_errors(doc, match):
    with pytest.raises(ParseError, match=match):
        parse_wcsp_file(doc)


def test_parse_error_names_line():
    with pytest.raises(ParseError, match="line 4"):
        parse_wcsp_file("x 1 2 1 10\n2\n1 0 0 1\nq 5\n")


def test_nullary_and_duplicate_scopes():
    doc = "x 2 2 4 100\n2 2\n0 7 0\n1 1 0 1\n0 2\n2 1 0 1 1\n0 1 3\n2 0 1 0 0\n"
    s, f = parse_wcsp_file(doc)
    # the constant lands on the first scope; (1, 0) is reordered and merged with (0, 1)
    assert s.scopes == ((1,), (0, 1))
    assert f[s.block(0)].tolist() == [-9, -7]
    assert f[s.block(1)].tolist() == [-1, -1, -3, -1]


def test_no_constraints():
    s, f = parse_wcsp_file("x 2 3 0 10\n3 2\n")
    assert s.scopes == ((0,),) and f.tolist() == [0, 0, 0]


def test_native_fixture():
    s, f = parse_native((DATA / "walkthrough_f1.txt").read_text())
    s1, f1 = walkthrough(1)
    assert s == s1 and (f == f1).all()
    assert s.upper_bound(f) == 49


@given(instances(hard=True))
def test_native_round_trip(inst):
    s, f = inst
    s2, f2 = parse_native(emit_native(s, f))
    assert s2 == s
    assert np.array_equal(f2, f)


def test_native_round_trip_fractions():
    s, f = walkthrough(1)
    f = f / 7
    assert parse_native(emit_native(s, f))[1].tolist() == f.tolist()


@pytest.mark.parametrize(
    "doc, match",
    [
        ("variables 2\ndomains 2 2\nscope 1 0 : 1 2 3 4\n", "line 3.*ascending"),
        ("variables 2\ndomains 2 2\nscope 0 : 1\n", "needs 2 weights"),
        ("variables 2\ndomains 2 2\nscope 0 : 1 inf\n", "finite or -inf"),
        ("variables 2\ndomains 2\n", "line 2"),
        ("domains 2 2\n", "line 1"),
        ("variables 2\ndomains 2 2\n", "no scope"),
        ("variables 2\ndomains 2 2\nscope 0 1 2 3 4\n", "missing ':'"),
        ("variables 2\ndomains 2 2\nscope 0 : 1 2\nscope 0 : 1 2\n", "duplicate scope"),
        ("variables 1\ndomains 2\nscope 0 : 1 2\nfoo\n", "unknown keyword"),
    ],
)
def test_native_errors(doc, match):
    with pytest.raises(ParseError, match=match):
        parse_native(doc)


@given(st.text(max_size=80))
def test_fuzz_parsers_only_raise_parse_error(text):
    for parse in (parse_native, parse_wcsp_file):
        try:
            s, f = parse(text)
        except ParseError:
            continue
        assert f.shape == (s.n_tuples,)


def test_normalized_bound():
    assert normalized_bound(10, 20, 10) == 1.0
    assert normalized_bound(20, 20, 10) == 0.0
    assert normalized_bound(15, 20, 10) == 0.5
    assert normalized_bound(5, 5, 5) == 1.0
    # within 0.01 of the best counts as best
    assert normalized_bound(10.005, 20, 10) == 1.0
    with pytest.raises(ValueError):
        normalized_bound(25, 20, 10)
