"""Deactivating directions and their composition.

A direction is a sparse ``{tuple index: delta}`` dict with no zero entries.
A certificate pairs a removal set ``R`` with a direction that is negative on
``R``, zero on the rest of the instance it was built for, and has a
non-negative objective for every assignment.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .core import DEFAULT_SCALE_CAP, WcspStructure

Direction = dict  # dict[int, float]

# cancellation residue below this is treated as an exact zero
_ZERO = 1e-12


def clean(d: dict) -> dict:
    return {t: v for t, v in d.items() if abs(v) > _ZERO}


def add_scaled(base: dict, other: dict, scale: float) -> dict:
    """``base + scale * other`` as a new sparse direction."""
    out = dict(base)
    if scale == 0:
        return out
    for t, v in other.items():
        out[t] = out.get(t, 0.0) + scale * v
    return clean(out)


@dataclass(frozen=True)
class DeactivatingCertificate:
    removed: frozenset
    direction: dict

    @property
    def nnz(self) -> int:
        return len(self.direction)


@dataclass
class PropagationTrace:
    """Ordered removal sets with their directions, plus the wiped scope if any."""

    steps: list = field(default_factory=list)
    wiped_scope: int | None = None

    def append(self, removed: Iterable[int], direction: dict) -> None:
        removed = frozenset(int(t) for t in removed)
        if not removed:
            raise ValueError("empty removal set")
        for prev, _ in self.steps:
            if prev & removed:
                raise ValueError("removal sets of a trace must be disjoint")
        self.steps.append((removed, direction))

    def __len__(self) -> int:
        return len(self.steps)

    def removed_union(self) -> frozenset:
        out: frozenset = frozenset()
        for r, _ in self.steps:
            out |= r
        return out


def generic_direction(
    structure: WcspStructure, allowed: np.ndarray, removed: Iterable[int]
) -> DeactivatingCertificate:
    """-1 on ``R``, ``delta`` on forbidden tuples, 0 elsewhere.

    ``delta`` is the number of scopes touched by ``R``.  The caller guarantees
    that forbidding ``R`` loses no solution of ``allowed``; otherwise the
    result is not in the dual cone.
    """
    removed = frozenset(int(t) for t in removed)
    if not removed:
        raise ValueError("empty removal set")
    allowed = np.asarray(allowed, dtype=bool)
    if not all(allowed[t] for t in removed):
        raise ValueError("removal set is not a subset of the instance")
    delta = float(len({int(structure.tuple_scope[t]) for t in removed}))
    d = {int(t): delta for t in np.nonzero(~allowed)[0]}
    for t in removed:
        d[t] = -1.0
    return DeactivatingCertificate(removed, d)


def forbidden_set_direction(
    structure: WcspStructure, removed: Iterable[int], forbidden: Iterable[int]
) -> dict:
    """:func:`generic_direction` for the instance ``T - forbidden``, without a dense mask."""
    removed = set(removed)
    delta = float(len({int(structure.tuple_scope[t]) for t in removed}))
    d = {int(t): delta for t in forbidden}
    for t in removed:
        d[int(t)] = -1.0
    return d


def ac_support_direction(structure: WcspStructure, scope: int, var: int, value: int) -> dict:
    """-1 on every ``(S, l)`` with ``l[var] == value``, +1 on ``({var}, value)``.

    Lies in the orthogonal space: both parts fire exactly when ``x[var] == value``.
    """
    u = structure.unary_index(var)
    if u is None:
        raise ValueError(f"no unary scope for variable {var}")
    d = {t: -1.0 for t in structure.block_of_var(var, value, scope)}
    d[structure.offsets[u] + value] = 1.0
    return d


def composition_factor(d_prev: dict, removed: Iterable[int], d_next: dict) -> float:
    """Scale for ``d_prev`` so that ``d_next + scale * d_prev`` is <= -1 on ``removed``."""
    ratios = [(-1.0 - d_next.get(t, 0.0)) / d_prev[t] for t in removed if d_next.get(t, 0.0) > -1.0]
    return max(ratios) if ratios else 0.0


def compose_pair(d_prev: dict, removed: Iterable[int], d_next: dict) -> dict:
    """Merge an ``R``-deactivating ``d_prev`` for ``A`` with an ``R'``-deactivating
    ``d_next`` for ``A - R`` into an ``(R | R')``-deactivating direction for ``A``."""
    removed = list(removed)
    return add_scaled(d_next, d_prev, composition_factor(d_prev, removed, d_next))


def chosen_indices(structure: WcspStructure, trace: PropagationTrace, scope: int) -> list[int]:
    """Steps whose removal set meets the block of ``scope``."""
    block = structure.block(scope)
    idx = [i for i, (r, _) in enumerate(trace.steps) if any(block.start <= t < block.stop for t in r)]
    if not idx:
        raise ValueError(f"scope {scope} is untouched by the trace")
    return idx


def compose_trace(trace: PropagationTrace, indices: Iterable[int]) -> DeactivatingCertificate:
    """Fold the chosen steps (and any step the running direction touches) backwards."""
    chosen = set(indices)
    if not chosen:
        raise ValueError("index set must be non-empty")
    if min(chosen) < 0 or max(chosen) >= len(trace.steps):
        raise ValueError("index out of range for the trace")
    i = max(chosen)
    removed, d_star = trace.steps[i]
    q = set(removed)
    d_star = dict(d_star)
    while i > 0:
        i -= 1
        r_i, d_i = trace.steps[i]
        if i in chosen or any(d_star.get(t, 0.0) != 0.0 for t in r_i):
            d_star = compose_pair(d_i, r_i, d_star)
            q |= r_i
    return DeactivatingCertificate(frozenset(q), d_star)


def verify_certificate(
    structure: WcspStructure,
    allowed: np.ndarray,
    cert: DeactivatingCertificate,
    tol: float = 1e-9,
    cap: int = DEFAULT_SCALE_CAP,
) -> bool:
    """Check the three deactivation conditions, the cone one by enumeration."""
    allowed = np.asarray(allowed, dtype=bool)
    d = cert.direction
    if not cert.removed:
        return False
    for t in cert.removed:
        if not allowed[t] or d.get(t, 0.0) >= 0:
            return False
    for t, v in d.items():
        if allowed[t] and t not in cert.removed and abs(v) > tol:
            return False
    return bool(structure.evaluate_all(d, cap).min() >= -tol)
