"""Exhaustive ground truth for small instances.

Everything here enumerates all assignments and refuses (``OracleScaleError``)
beyond the configured cap.
"""
from __future__ import annotations

import numpy as np

from .core import ACTIVE_TOL, DEFAULT_SCALE_CAP, WcspStructure
from .csp import solutions

TOL = 1e-9


def _values(structure, f, cap):
    return structure.evaluate_all(f, cap)


def brute_force_optimum(structure: WcspStructure, g, cap: int = DEFAULT_SCALE_CAP):
    """``(max objective, list of maximizing assignments)``.

    Ties are exact: weights here are either integers or results of the same
    arithmetic, so no tolerance is applied.
    """
    vals = _values(structure, g, cap)
    best = float(vals.max())
    grid = list(structure.assignments(cap))
    return best, [grid[i] for i in np.nonzero(vals == best)[0]]


def objective_levels(structure: WcspStructure, g, cap: int = DEFAULT_SCALE_CAP) -> np.ndarray:
    """Distinct objective values in decreasing order."""
    return np.unique(_values(structure, g, cap))[::-1]


def in_orthogonal_space(structure: WcspStructure, d, tol: float = TOL, cap: int = DEFAULT_SCALE_CAP) -> bool:
    return bool(np.abs(_values(structure, d, cap)).max() <= tol)


def in_dual_cone(structure: WcspStructure, d, tol: float = TOL, cap: int = DEFAULT_SCALE_CAP) -> bool:
    return bool(_values(structure, d, cap).min() >= -tol)


def _diff(structure, f, g, cap):
    vf, vg = _values(structure, f, cap), _values(structure, g, cap)
    both_inf = np.isneginf(vf) & np.isneginf(vg)
    with np.errstate(invalid="ignore"):
        out = vf - vg
    out[both_inf] = 0.0
    return out


def is_reparametrization(structure: WcspStructure, f, g, tol: float = TOL, cap: int = DEFAULT_SCALE_CAP) -> bool:
    """Every assignment has the same objective under ``f`` and ``g``."""
    return bool(np.abs(_diff(structure, f, g, cap)).max() <= tol)


def is_superreparametrization(
    structure: WcspStructure, f, g, tol: float = TOL, cap: int = DEFAULT_SCALE_CAP
) -> bool:
    """No assignment loses objective going from ``g`` to ``f``."""
    return bool(_diff(structure, f, g, cap).min() >= -tol)


def check_optimality(structure: WcspStructure, f, g, tol: float = TOL, cap: int = DEFAULT_SCALE_CAP) -> bool:
    """Whether the bound of ``f`` equals the optimum of ``g``.

    Equivalently, some solution of the active CSP of ``f`` keeps the same
    objective under ``g``; both forms are checked and must agree.
    """
    if not is_superreparametrization(structure, f, g, tol, cap):
        raise ValueError("f is not a super-reparametrization of g")
    bound = structure.upper_bound(f)
    opt, _ = brute_force_optimum(structure, g, cap)
    by_bound = abs(bound - opt) <= tol or bound == opt
    vf, vg = _values(structure, f, cap), _values(structure, g, cap)
    sol = structure.active_set(f)[structure.assignment_matrix(cap)].all(axis=1)
    by_csp = bool((sol & (np.abs(vf - vg) <= tol)).any())
    assert by_bound == by_csp, "optimality criteria disagree"
    return by_bound


def optimal_superrepar_from_csp(structure: WcspStructure, g, allowed, cap: int = DEFAULT_SCALE_CAP) -> np.ndarray:
    """Optimal super-reparametrization of ``g`` whose active CSP is ``allowed``.

    Needs every optimal assignment of ``g`` to be a solution of ``allowed``.
    Weights are the best objective spread evenly over the scopes on allowed
    tuples and the second-best one off them.
    """
    allowed = np.asarray(allowed, dtype=bool)
    vals = _values(structure, g, cap)
    best = vals.max()
    sol = allowed[structure.assignment_matrix(cap)].all(axis=1)
    if not sol[vals == best].all():
        raise ValueError("some optimal assignment is not a solution of the CSP")
    levels = np.unique(vals)
    second = levels[-2] if len(levels) > 1 else best
    n = structure.n_scopes
    return np.where(allowed, best / n, second / n)


def superrepar_with_active_set(structure: WcspStructure, g, target_active, cap: int = DEFAULT_SCALE_CAP) -> np.ndarray:
    """A super-reparametrization of ``g`` whose active CSP is ``target_active``.

    Uses a flat weight of bound/|C| lifted by one on the target tuples; each
    scope needs at least one target tuple.
    """
    target = np.asarray(target_active, dtype=bool)
    for s in range(structure.n_scopes):
        if not target[structure.block(s)].any():
            raise ValueError(f"scope {s} has no tuple in the target active set")
    return structure.upper_bound(np.asarray(g, dtype=float)) / structure.n_scopes + target.astype(float)


def optimal_set(structure: WcspStructure, f, tol: float = ACTIVE_TOL, cap: int = DEFAULT_SCALE_CAP) -> list:
    """Assignments within ``tol`` of the optimum of ``f``."""
    vals = _values(structure, f, cap)
    grid = list(structure.assignments(cap))
    return [grid[i] for i in np.nonzero(vals >= vals.max() - tol)[0]]


def csp_solutions(structure: WcspStructure, allowed, cap: int = DEFAULT_SCALE_CAP) -> list:
    return solutions(structure, allowed, cap)
