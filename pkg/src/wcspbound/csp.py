"""Crisp CSP instances over a fixed structure.

An instance is a boolean mask over the tuple table (True = allowed).  A set
of assignments is a list of value tuples in lexicographic order.
"""
from __future__ import annotations

from typing import Iterable, Sequence

import numpy as np

from .core import DEFAULT_SCALE_CAP, WcspStructure


def full_instance(structure: WcspStructure) -> np.ndarray:
    return np.ones(structure.n_tuples, dtype=bool)


def instance_from(structure: WcspStructure, tuples: Iterable[int]) -> np.ndarray:
    a = np.zeros(structure.n_tuples, dtype=bool)
    a[list(tuples)] = True
    return a


def _solution_mask(structure: WcspStructure, allowed: np.ndarray, cap: int) -> np.ndarray:
    allowed = np.asarray(allowed, dtype=bool)
    if allowed.shape != (structure.n_tuples,):
        raise ValueError("instance size differs from the tuple count")
    return allowed[structure.assignment_matrix(cap)].all(axis=1)


def solutions(
    structure: WcspStructure, allowed: np.ndarray, cap: int = DEFAULT_SCALE_CAP
) -> list[tuple[int, ...]]:
    """All assignments that use only allowed tuples, by exhaustive enumeration."""
    mask = _solution_mask(structure, allowed, cap)
    grid = list(structure.assignments(cap))
    return [grid[i] for i in np.nonzero(mask)[0]]


def is_satisfiable(
    structure: WcspStructure, allowed: np.ndarray, cap: int = DEFAULT_SCALE_CAP
) -> bool:
    allowed = np.asarray(allowed, dtype=bool)
    # cheap necessary condition before enumerating
    for s in range(structure.n_scopes):
        if not allowed[structure.block(s)].any():
            return False
    return bool(_solution_mask(structure, allowed, cap).any())


def restrict_csp(structure: WcspStructure, allowed: np.ndarray, var: int, value: int) -> np.ndarray:
    """``A`` with every unary tuple ``({var}, k')``, ``k' != value``, forbidden."""
    u = structure.unary_index(var)
    if u is None:
        raise ValueError(f"no unary scope for variable {var}")
    out = np.array(allowed, dtype=bool)
    blk = structure.block(u)
    keep = out[blk.start + value]
    out[blk] = False
    out[blk.start + value] = keep
    return out


def minimal_csp(structure: WcspStructure, xs: Iterable[Sequence[int]]) -> np.ndarray:
    """Smallest instance whose solution set contains every assignment in ``xs``."""
    out = np.zeros(structure.n_tuples, dtype=bool)
    for x in xs:
        out[structure.used_tuples(x)] = True
    return out


def positive_consistency_closure(
    structure: WcspStructure, allowed: np.ndarray, cap: int = DEFAULT_SCALE_CAP
) -> np.ndarray:
    return minimal_csp(structure, solutions(structure, allowed, cap))
