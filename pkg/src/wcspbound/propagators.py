"""Constraint propagation over crisp instances, recording a certificate per removal.

Three propagators are available: arc consistency (AC), singleton arc
consistency layered over AC, and cycle consistency layered over AC.  Every
removal step comes with a direction that deactivates exactly the removed
tuples, so a wipe-out can be turned into a certificate of unsatisfiability.
"""
from __future__ import annotations

from collections import deque
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterator, NamedTuple, Sequence

import networkx as nx
import numpy as np

from .core import WcspStructure
from .csp import restrict_csp
from .directions import PropagationTrace, forbidden_set_direction

MODES = ("ac", "sac", "cc")


class PropagationStep(NamedTuple):
    removed: tuple
    direction: dict
    # forbidden tuples the step relied on
    witness: frozenset


@dataclass
class PropagatorConfig:
    mode: str = "ac"
    cycles: list = field(default_factory=list)
    # finish the singleton tests of a variable before returning to AC
    same_variable: bool = True

    def __post_init__(self):
        self.mode = self.mode.lower()
        if self.mode not in MODES:
            raise ValueError(f"unknown propagation mode {self.mode!r}")
        if self.mode == "cc" and not self.cycles:
            raise ValueError("cycle consistency needs a non-empty cycle list")


# -- precomputed index tables ---------------------------------------------------


class _Tables:
    def __init__(self, structure: WcspStructure):
        if not structure.has_all_unary():
            raise ValueError("propagation needs a unary scope for every variable")
        self.unary_offset = [structure.offsets[structure.unary_index(v)] for v in range(structure.variable_count)]
        self.arcs = []
        self.support = {}
        self.var_arcs = {v: [] for v in range(structure.variable_count)}
        for s, scope in enumerate(structure.scopes):
            if len(scope) < 2:
                continue
            for pos, v in enumerate(scope):
                self.arcs.append((s, v))
                self.var_arcs[v].append((s, v))
                col = structure.block_values[s][:, pos]
                self.support[(s, v)] = [
                    structure.offsets[s] + np.nonzero(col == k)[0] for k in range(structure.domain_sizes[v])
                ]


@lru_cache(maxsize=64)
def _tables(structure: WcspStructure) -> _Tables:
    return _Tables(structure)


# -- arc consistency --------------------------------------------------------------


class _AcRun:
    """One AC-3 style pass over a live instance (mutated in place).

    Arcs ``(scope, var)`` are queued FIFO in declaration order.  For an arc,
    unsupported allowed unary values are removed first (one step each, values
    ascending), then tuples hanging over forbidden unary values (one step per
    value).
    """

    def __init__(self, structure, allowed, arcs=None, record_causes=False):
        self.structure = structure
        self.tab = _tables(structure)
        self.a = allowed
        start = self.tab.arcs if arcs is None else arcs
        self.queue = deque(start)
        self.queued = set(self.queue)
        self.causes = {} if record_causes else None
        self.wiped = None

    def _push(self, arc):
        if arc not in self.queued:
            self.queued.add(arc)
            self.queue.append(arc)

    def steps(self) -> Iterator[PropagationStep]:
        st, a, tab = self.structure, self.a, self.tab
        while self.queue:
            arc = self.queue.popleft()
            self.queued.discard(arc)
            s, i = arc
            u0 = tab.unary_offset[i]
            sup = tab.support[arc]
            for k, idx in enumerate(sup):
                if a[u0 + k] and not a[idx].any():
                    t = int(u0 + k)
                    a[t] = False
                    witness = frozenset(int(x) for x in idx)
                    if self.causes is not None:
                        self.causes[t] = witness
                    for other in tab.var_arcs[i]:
                        self._push(other)
                    d = {x: 1.0 for x in witness}
                    d[t] = -1.0
                    yield PropagationStep((t,), d, witness)
                    if not a[u0 : u0 + st.domain_sizes[i]].any():
                        self.wiped = st.unary_index(i)
                        return
            for k, idx in enumerate(sup):
                if a[u0 + k]:
                    continue
                live = idx[a[idx]]
                if live.size == 0:
                    continue
                a[live] = False
                t = int(u0 + k)
                if self.causes is not None:
                    for x in live:
                        self.causes[int(x)] = frozenset((t,))
                for j in st.scopes[s]:
                    self._push((s, j))
                d = {int(x): -1.0 for x in idx}
                d[t] = 1.0
                yield PropagationStep(tuple(int(x) for x in live), d, frozenset((t,)))
                if not a[st.block(s)].any():
                    self.wiped = s
                    return


def ac_step(structure: WcspStructure, allowed: np.ndarray) -> PropagationStep | None:
    """First AC removal for ``allowed`` (unchanged), or None at the AC fixpoint."""
    run = _AcRun(structure, np.array(allowed, dtype=bool))
    return next(run.steps(), None)


def ac_closure(structure: WcspStructure, allowed: np.ndarray) -> tuple[np.ndarray, int | None]:
    """AC fixpoint of ``allowed`` and the wiped scope (propagation stops at a wipe-out)."""
    run = _AcRun(structure, np.array(allowed, dtype=bool))
    for _ in run.steps():
        pass
    return run.a, run.wiped


# -- singleton arc consistency ------------------------------------------------------


def _compatible(structure: WcspStructure, t: int, var: int, value: int) -> bool:
    scope, vals = structure.tuple_of(t)
    return var not in scope or vals[scope.index(var)] == value


def _sac_witness(structure, allowed, var, value):
    """Forbidden tuples that suffice to wipe out AC after fixing ``var = value``."""
    live = restrict_csp(structure, allowed, var, value)
    run = _AcRun(structure, live, record_causes=True)
    for _ in run.steps():
        pass
    if run.wiped is None:
        return None
    causes = run.causes
    stack = list(range(structure.offsets[run.wiped], structure.offsets[run.wiped + 1]))
    seen = set(stack)
    p = set()
    while stack:
        t = stack.pop()
        if t in causes:
            nxt = causes[t]
            for c in nxt:
                if c not in seen:
                    seen.add(c)
                    stack.append(c)
        elif not allowed[t] and _compatible(structure, t, var, value):
            p.add(t)
        # tuples excluded by the restriction (or incompatible with it) are
        # never used by an assignment with var = value, so they are skipped
    return frozenset(p)


def sac_step(structure: WcspStructure, allowed: np.ndarray, variables=None) -> PropagationStep | None:
    """First singleton-inconsistent unary tuple, or None when ``allowed`` is SAC.

    ``variables`` restricts the candidates (default: all, ascending).
    """
    allowed = np.asarray(allowed, dtype=bool)
    tab = _tables(structure)
    for var in range(structure.variable_count) if variables is None else variables:
        u0 = tab.unary_offset[var]
        for k in range(structure.domain_sizes[var]):
            if not allowed[u0 + k]:
                continue
            p = _sac_witness(structure, allowed, var, k)
            if p is None:
                continue
            assert p, "singleton wipe-out without forbidden witnesses"
            t = int(u0 + k)
            return PropagationStep((t,), forbidden_set_direction(structure, (t,), p), p)
    return None


# -- cycle consistency -------------------------------------------------------------


def _edge_matrix(structure, mask, a, b):
    """Allowed-pair matrix for variables ``a`` then ``b`` (rows are values of ``a``)."""
    s = structure.scope_index[tuple(sorted((a, b)))]
    m = mask[structure.block(s)].reshape(structure.domain_sizes[min(a, b)], structure.domain_sizes[max(a, b)])
    return m if a < b else m.T


def _cycle_feasible(structure, mask, cycle, value) -> bool:
    """Whether the cycle (starting at its fixed variable) has an allowed assignment."""
    tab = _tables(structure)

    def unary(v):
        u0 = tab.unary_offset[v]
        return mask[u0 : u0 + structure.domain_sizes[v]]

    first = cycle[0]
    reach = np.zeros(structure.domain_sizes[first], dtype=bool)
    reach[value] = unary(first)[value]
    for prev, cur in zip(cycle, cycle[1:]):
        m = _edge_matrix(structure, mask, prev, cur)
        reach = unary(cur) & m[reach].any(axis=0)
        if not reach.any():
            return False
    closing = _edge_matrix(structure, mask, cycle[-1], first)
    return bool(closing[reach, value].any())


def _rotate(cycle, var):
    pos = cycle.index(var)
    return list(cycle[pos:]) + list(cycle[:pos])


def _cycle_tuples(structure, cycle):
    tab = _tables(structure)
    out = []
    for v in cycle:
        u0 = tab.unary_offset[v]
        out.extend(range(u0, u0 + structure.domain_sizes[v]))
    for a, b in zip(cycle, cycle[1:] + cycle[:1]):
        s = structure.scope_index[tuple(sorted((a, b)))]
        out.extend(range(structure.offsets[s], structure.offsets[s + 1]))
    return out


def _cc_witness(structure, allowed, cycle, var, value):
    if _cycle_feasible(structure, allowed, cycle, value):
        return None
    p = [
        t
        for t in _cycle_tuples(structure, cycle)
        if not allowed[t] and _compatible(structure, t, var, value)
    ]
    mask = np.ones(structure.n_tuples, dtype=bool)
    mask[p] = False
    # greedy shrink: keep only the forbidden tuples the infeasibility needs
    for t in list(p):
        mask[t] = True
        if _cycle_feasible(structure, mask, cycle, value):
            mask[t] = False
    return frozenset(t for t in p if not mask[t])


def cc_step(structure: WcspStructure, allowed: np.ndarray, cycles: Sequence[Sequence[int]]) -> PropagationStep | None:
    """First unary tuple with no allowed extension around some cycle, or None."""
    if not structure.is_binary():
        raise ValueError("cycle consistency needs a binary structure")
    allowed = np.asarray(allowed, dtype=bool)
    tab = _tables(structure)
    for var in range(structure.variable_count):
        through = [_rotate(list(c), var) for c in cycles if var in c]
        if not through:
            continue
        u0 = tab.unary_offset[var]
        for k in range(structure.domain_sizes[var]):
            if not allowed[u0 + k]:
                continue
            for cyc in through:
                p = _cc_witness(structure, allowed, cyc, var, k)
                if p is not None:
                    t = int(u0 + k)
                    return PropagationStep((t,), forbidden_set_direction(structure, (t,), p), p)
    return None


def _canonical_cycle(cycle):
    c = _rotate(list(cycle), min(cycle))
    if len(c) > 2 and c[-1] < c[1]:
        c = [c[0]] + c[1:][::-1]
    return tuple(c)


def select_cycles(structure: WcspStructure) -> list[list[int]]:
    """Cycles of the constraint graph to check, chosen by average degree.

    Sparse graphs get every cycle of length 3 and 4, medium ones only the
    triangles, and dense ones (or graphs where the short cycles are absent)
    a fundamental cycle basis.
    """
    g = nx.Graph()
    g.add_nodes_from(range(structure.variable_count))
    g.add_edges_from(s for s in structure.scopes if len(s) == 2)
    if g.number_of_edges() == 0:
        return []
    avg = 2 * g.number_of_edges() / g.number_of_nodes()
    cycles = []
    if avg <= 10:
        bound = 4 if avg <= 5 else 3
        cycles = sorted({_canonical_cycle(c) for c in nx.simple_cycles(g, length_bound=bound) if len(c) >= 3})
    if not cycles:
        cycles = sorted(_canonical_cycle(c) for c in nx.cycle_basis(g))
    return [list(c) for c in cycles]


# -- driver ---------------------------------------------------------------------


def propagate(
    structure: WcspStructure, allowed: np.ndarray, cfg: PropagatorConfig | None = None
) -> tuple[int | None, PropagationTrace]:
    """Run the configured propagator until a wipe-out or a fixpoint.

    Returns the wiped scope (None at a fixpoint) and the trace of removals.
    The input mask is not modified.
    """
    cfg = cfg or PropagatorConfig()
    live = np.array(allowed, dtype=bool)
    trace = PropagationTrace()
    for s in range(structure.n_scopes):
        if not live[structure.block(s)].any():
            raise ValueError(f"scope {s} has no allowed tuple")
    tab = _tables(structure)
    arcs = None
    while True:
        run = _AcRun(structure, live, arcs=arcs)
        for step in run.steps():
            trace.append(step.removed, step.direction)
        if run.wiped is not None:
            trace.wiped_scope = run.wiped
            return run.wiped, trace
        if cfg.mode == "ac":
            return None, trace
        if cfg.mode == "sac":
            step = sac_step(structure, live)
        else:
            step = cc_step(structure, live, cfg.cycles)
        if step is None:
            return None, trace
        while step is not None:
            (t,) = step.removed
            live[t] = False
            trace.append(step.removed, step.direction)
            var = structure.tuple_of(t)[0][0]
            u = structure.unary_index(var)
            if not live[structure.block(u)].any():
                trace.wiped_scope = u
                return u, trace
            step = None
            if cfg.mode == "sac" and cfg.same_variable:
                step = sac_step(structure, live, [var])
        # back to AC, seeded with the arcs of the variable that lost a value
        arcs = list(tab.var_arcs[var])


# -- EDAC ---------------------------------------------------------------------------


def edac_check(structure: WcspStructure, f: np.ndarray, order: Sequence[int] | None = None) -> tuple[bool, list[str]]:
    """Check existential directional arc consistency of ``f`` w.r.t. ``order``.

    ``order`` lists the variables from first to last (default: ascending).
    Returns the verdict and a human readable line per violation.
    """
    if not structure.is_binary():
        raise ValueError("EDAC is defined for binary structures")
    if not structure.has_all_unary():
        raise ValueError("EDAC needs a unary scope for every variable")
    rank = {v: r for r, v in enumerate(order if order is not None else range(structure.variable_count))}
    if sorted(rank) != list(range(structure.variable_count)):
        raise ValueError("order must be a permutation of the variables")
    act = structure.active_set(f)
    tab = _tables(structure)
    neigh = {v: [] for v in range(structure.variable_count)}
    for s, scope in enumerate(structure.scopes):
        if len(scope) == 2:
            a, b = scope
            neigh[a].append((b, s))
            neigh[b].append((a, s))

    def supports(i, k, j, s):
        simple = full = False
        for t in structure.block_of_var(i, k, s):
            if act[t]:
                simple = True
                l = structure.tuple_values(t)[structure.scopes[s].index(j)]
                if act[tab.unary_offset[j] + l]:
                    full = True
        return simple, full

    report = []
    for i in range(structure.variable_count):
        any_full = False
        for k in range(structure.domain_sizes[i]):
            all_full = bool(act[tab.unary_offset[i] + k])
            for j, s in sorted(neigh[i]):
                simple, full = supports(i, k, j, s)
                all_full &= full
                if rank[i] <= rank[j] and not full:
                    report.append(f"({{{i}}},{k}) is not fully supported by variable {j}")
                elif rank[j] <= rank[i] and not simple:
                    report.append(f"({{{i}}},{k}) is not simply supported by variable {j}")
            any_full |= all_full
        if not any_full:
            report.append(f"variable {i} has no active value fully supported by all neighbours")
    return not report, report
