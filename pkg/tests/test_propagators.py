import itertools

import numpy as np
import pytest
from hypothesis import assume, given, strategies as st

from instances import frustrated_square, instances, walkthrough
from wcspbound.core import WcspStructure
from wcspbound.csp import solutions
from wcspbound.directions import DeactivatingCertificate, verify_certificate
from wcspbound.oracle import in_orthogonal_space
from wcspbound.propagators import (
    PropagatorConfig,
    ac_closure,
    ac_step,
    cc_step,
    edac_check,
    propagate,
    sac_step,
    select_cycles,
)


def names(s, steps):
    return [[s.describe(t) for t in r] for r, _ in steps]


def test_consistent_instance_has_empty_trace():
    s = WcspStructure([2, 2], [(0,), (1,), (0, 1)])
    for mode in ("ac", "sac"):
        wiped, tr = propagate(s, np.ones(s.n_tuples, bool), PropagatorConfig(mode))
        assert wiped is None and len(tr) == 0
    assert ac_step(s, np.ones(s.n_tuples, bool)) is None


def test_ac_walkthrough_order():
    s, f2 = walkthrough(2)
    wiped, tr = propagate(s, s.active_set(f2))
    assert wiped == 2  # unary scope of variable 2
    assert names(s, tr.steps) == [
        ["({0,1},(0, 0))"],
        ["({1},0)"],
        ["({1,2},(0, 0))"],
        ["({2},0)"],
        ["({0,2},(0, 1))"],
        ["({2},1)"],
    ]


def test_ac_step_kinds():
    s = WcspStructure([2, 2], [(0,), (1,), (0, 1)])
    # unary (0,0) has no support
    a = np.ones(s.n_tuples, bool)
    a[[4, 5]] = False
    step = ac_step(s, a)
    assert step.removed == (0,) and step.witness == {4, 5}
    assert in_orthogonal_space(s, step.direction)
    # pair tuples over a forbidden unary value
    b = np.ones(s.n_tuples, bool)
    b[0] = False
    step = ac_step(s, b)
    assert step.removed == (4, 5)
    assert step.direction == {4: -1.0, 5: -1.0, 0: 1.0}


def test_sac_walkthrough():
    s, f3 = walkthrough(3)
    a = s.active_set(f3)
    assert ac_closure(s, a)[1] is None
    step = sac_step(s, a)
    assert step.removed == (0,)
    assert sorted(s.describe(t) for t in step.witness) == ["({0,1},(0, 1))", "({0,2},(0, 0))", "({1,2},(0, 1))"]
    wiped, tr = propagate(s, a, PropagatorConfig("sac"))
    assert wiped == 0 and names(s, tr.steps) == [["({0},0)"], ["({0},1)"]]


def test_sac_on_optimal_instance_does_not_wipe():
    s, f4 = walkthrough(4)
    wiped, tr = propagate(s, s.active_set(f4), PropagatorConfig("sac"))
    assert wiped is None
    left = s.active_set(f4)
    left[list(tr.removed_union())] = False
    assert (0, 0, 0) in solutions(s, left)


def test_cycle_consistency():
    tri = WcspStructure([2, 2, 2], [(0,), (1,), (2,), (0, 1), (1, 2), (0, 2)])
    assert cc_step(tri, np.ones(tri.n_tuples, bool), select_cycles(tri)) is None
    s, allowed, _ = frustrated_square()
    assert ac_closure(s, allowed)[1] is None
    assert not solutions(s, allowed)
    wiped, tr = propagate(s, allowed, PropagatorConfig("cc", select_cycles(s)))
    assert wiped is not None
    with pytest.raises(ValueError):
        cc_step(WcspStructure([2] * 3, [(0,), (1,), (2,), (0, 1, 2)]), np.ones(14, bool), [[0, 1, 2]])
    with pytest.raises(ValueError):
        PropagatorConfig("cc")


def _graph_structure(n, edges):
    return WcspStructure([2] * n, [(v,) for v in range(n)] + list(edges))


def test_select_cycles():
    square = _graph_structure(4, [(0, 1), (1, 2), (2, 3), (0, 3)])
    assert select_cycles(square) == [[0, 1, 2, 3]]
    k5 = _graph_structure(5, itertools.combinations(range(5), 2))
    cyc = select_cycles(k5)
    assert sum(len(c) == 3 for c in cyc) == 10
    assert sum(len(c) == 4 for c in cyc) == 15  # 5 choose 4 vertex sets, 3 cycles each
    k13 = _graph_structure(13, itertools.combinations(range(13), 2))
    assert len(select_cycles(k13)) == 78 - 13 + 1
    # medium density: triangles only
    k8 = _graph_structure(8, itertools.combinations(range(8), 2))
    assert all(len(c) == 3 for c in select_cycles(k8)) and len(select_cycles(k8)) == 56
    assert select_cycles(_graph_structure(3, [])) == []
    # a tree with a long cycle only has the fundamental cycle
    hexagon = _graph_structure(6, [(i, (i + 1) % 6) for i in range(6)])
    assert [len(c) for c in select_cycles(hexagon)] == [6]


def test_edac_walkthrough():
    s, f1 = walkthrough(1)
    ok, report = edac_check(s, f1)
    assert not ok and "({0},1) is not fully supported by variable 1" in report
    s, f2 = walkthrough(2)
    assert edac_check(s, f2) == (True, [])
    assert edac_check(s, s.zeros())[0]
    with pytest.raises(ValueError):
        edac_check(WcspStructure([2] * 3, [(0,), (1,), (2,), (0, 1, 2)]), np.zeros(14))


def _replay(s, allowed, trace):
    live = allowed.copy()
    for removed, d in trace.steps:
        yield live.copy(), removed, d
        live[list(removed)] = False


@given(instances(with_unary=True))
def test_every_step_certificate_verifies(inst):
    s, f = inst
    allowed = s.active_set(f)
    for mode in ("ac", "sac"):
        wiped, tr = propagate(s, allowed, PropagatorConfig(mode))
        for live, removed, d in _replay(s, allowed, tr):
            assert verify_certificate(s, live, DeactivatingCertificate(frozenset(removed), d))


@st.composite
def cyclic_instances(draw):
    n = draw(st.integers(3, 4))
    doms = draw(st.lists(st.integers(1, 3), min_size=n, max_size=n))
    s = _graph_structure(n, itertools.combinations(range(n), 2))
    s = WcspStructure(doms, s.scopes)
    w = draw(st.lists(st.integers(-3, 3), min_size=s.n_tuples, max_size=s.n_tuples))
    return s, s.weights(w)


@given(cyclic_instances())
def test_cc_certificates_verify(inst):
    s, f = inst
    cycles = select_cycles(s)
    allowed = s.active_set(f)
    wiped, tr = propagate(s, allowed, PropagatorConfig("cc", cycles))
    for live, removed, d in _replay(s, allowed, tr):
        assert verify_certificate(s, live, DeactivatingCertificate(frozenset(removed), d))


@given(instances(with_unary=True))
def test_ac_directions_are_orthogonal_and_solutions_kept(inst):
    s, f = inst
    allowed = s.active_set(f)
    wiped, tr = propagate(s, allowed)
    for _, d in tr.steps:
        assert in_orthogonal_space(s, d)
    left = allowed.copy()
    left[list(tr.removed_union())] = False
    assert solutions(s, left) == solutions(s, allowed)


@given(instances(with_unary=True))
def test_sac_fixpoint_is_ac_and_sac(inst):
    s, f = inst
    allowed = s.active_set(f)
    wiped, tr = propagate(s, allowed, PropagatorConfig("sac"))
    assume(wiped is None)
    left = allowed.copy()
    left[list(tr.removed_union())] = False
    assert ac_step(s, left) is None
    assert sac_step(s, left) is None
    assert solutions(s, left) == solutions(s, allowed)
