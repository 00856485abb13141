"""Iterative bound minimization over super-reparametrizations.

Each iteration propagates over the (theta-)active tuples, turns a wipe-out
into a deactivating direction and steps along it with the largest step that
is guaranteed not to raise the bound.  Capacity scaling runs this with a
decreasing activity threshold ``theta``.
"""
from __future__ import annotations

import logging
import math
import time
from dataclasses import dataclass, field

import numpy as np

from .core import WcspStructure
from .directions import DeactivatingCertificate, PropagationTrace, chosen_indices, compose_trace
from .propagators import PropagatorConfig, propagate, select_cycles

log = logging.getLogger(__name__)

SOLVER_MODES = {"vac": "ac", "vsac-sr": "sac", "vcc-sr": "cc"}


class InfeasibleInstance(Exception):
    """The hard constraints admit no assignment; the optimum is ``-inf``."""


@dataclass
class SolverConfig:
    mode: str = "vac"
    theta_init: float | str = "auto"
    theta_factor: float = 10.0
    theta_min: float = 1e-6
    stall_window: int = 20
    stall_epsilon: float = 1e-15
    max_iterations: int | None = None
    time_limit: float | None = None
    vac_prepass: bool = True

    def __post_init__(self):
        self.mode = self.mode.lower()
        if self.mode not in SOLVER_MODES:
            raise ValueError(f"unknown mode {self.mode!r}, expected one of {sorted(SOLVER_MODES)}")
        if self.theta_factor <= 1:
            raise ValueError("theta_factor must exceed 1")
        if self.theta_min <= 0:
            raise ValueError("theta_min must be positive")
        if self.stall_window < 1:
            raise ValueError("stall_window must be at least 1")
        if self.theta_init != "auto" and float(self.theta_init) < 0:
            raise ValueError("theta_init must be non-negative")


@dataclass(frozen=True)
class IterationRecord:
    k: int
    bound: float
    theta: float
    alpha: float
    cert_nnz: int
    elapsed: float


@dataclass(frozen=True)
class SolverReport:
    bound: float
    structure: WcspStructure
    weights: np.ndarray
    reason: str
    log: tuple = field(default_factory=tuple)

    @property
    def iterations(self) -> int:
        return len(self.log)


@dataclass(frozen=True)
class Step:
    weights: np.ndarray
    alpha: float
    beta: float
    gamma: float
    certificate: DeactivatingCertificate
    # propagation input and output behind the certificate
    allowed: np.ndarray
    trace: PropagationTrace


def line_search(structure: WcspStructure, f: np.ndarray, cert: DeactivatingCertificate) -> tuple[float, float]:
    """Step limits ``(beta, gamma)`` for moving ``f`` along ``cert.direction``.

    ``beta`` keeps every tuple with a positive entry at or below its scope
    maximum; ``gamma`` stops where a tuple outside ``R`` catches up with the
    decreasing maximum of a wiped scope.  Either is ``inf`` when unconstrained.
    Only the part of ``R`` that is active in ``f`` is considered, which makes
    certificates built on a theta-active set usable here.
    """
    d = cert.direction
    active = structure.active_set(f)
    maxima = structure.scope_maxima(f)
    r_eff = {t for t in cert.removed if active[t]}

    beta = math.inf
    for t, v in d.items():
        if v > 0 and np.isfinite(f[t]):
            beta = min(beta, (maxima[structure.tuple_scope[t]] - f[t]) / v)

    gamma = math.inf
    for s in sorted({int(structure.tuple_scope[t]) for t in r_eff}):
        blk = range(structure.offsets[s], structure.offsets[s + 1])
        if any(active[t] and t not in r_eff for t in blk):
            continue
        inside = [t for t in blk if t in r_eff]
        for tp in blk:
            if tp in r_eff or not np.isfinite(f[tp]):
                continue
            dp = d.get(tp, 0.0)
            for t in inside:
                dt = d.get(t, 0.0)
                if dp > dt:
                    gamma = min(gamma, (f[t] - f[tp]) / (dp - dt))
    return beta, gamma


def apply_step(f: np.ndarray, d: dict, alpha: float) -> np.ndarray:
    """``f + alpha * d``; ``-inf`` entries are left untouched."""
    if not (alpha > 0 and math.isfinite(alpha)):
        raise ValueError("step size must be finite and positive")
    out = np.array(f, dtype=float)
    for t, v in d.items():
        if np.isfinite(out[t]):
            out[t] += alpha * v
    return out


def check_feasible_scopes(structure: WcspStructure, f: np.ndarray) -> None:
    if not np.isfinite(structure.scope_maxima(f)).all():
        raise InfeasibleInstance("some scope has only -inf weights")


def improve_once(
    structure: WcspStructure, f: np.ndarray, pcfg: PropagatorConfig, theta: float = 0.0
) -> Step | None:
    """One improving step, or None when propagation finds no wipe-out.

    Raises :class:`InfeasibleInstance` when the step is unbounded, which can
    only happen if hard constraints make the instance infeasible.
    """
    check_feasible_scopes(structure, f)
    allowed = structure.theta_active_set(f, theta)
    wiped, trace = propagate(structure, allowed, pcfg)
    if wiped is None:
        return None
    cert = compose_trace(trace, chosen_indices(structure, trace, wiped))
    beta, gamma = line_search(structure, f, cert)
    alpha = min(beta, gamma)
    if math.isinf(alpha):
        raise InfeasibleInstance("unbounded step along a deactivating direction")
    new = apply_step(f, cert.direction, alpha)
    if not structure.upper_bound(new) < structure.upper_bound(f):
        # step too small to register in floating point
        log.debug("rejected step with alpha=%g: no bound decrease", alpha)
        return None
    return Step(new, alpha, beta, gamma, cert, allowed, trace)


def auto_theta(structure: WcspStructure, g: np.ndarray) -> float:
    """Weight range of the first pair scope plus that of the first unary scope."""

    def spread(s):
        w = g[structure.block(s)]
        w = w[np.isfinite(w)]
        return float(w.max() - w.min()) if w.size else 0.0

    theta = 0.0
    pairs = [s for s, sc in enumerate(structure.scopes) if len(sc) == 2]
    if pairs:
        theta += spread(pairs[0])
    u = structure.unary_index(0)
    if u is not None:
        theta += spread(u)
    return theta


def _propagator_config(structure: WcspStructure, mode: str) -> PropagatorConfig:
    pmode = SOLVER_MODES[mode]
    if pmode == "cc":
        if not structure.is_binary():
            raise ValueError("vcc-sr mode needs a binary structure")
        cycles = select_cycles(structure)
        if not cycles:
            return PropagatorConfig("ac")
        return PropagatorConfig("cc", cycles)
    return PropagatorConfig(pmode)


def _descend(structure, f, pcfg, cfg, records, start, on_step):
    """Capacity-scaled improvement loop; returns ``(weights, reason)``."""
    theta = auto_theta(structure, f) if cfg.theta_init == "auto" else float(cfg.theta_init)
    thetas = []
    while theta > cfg.theta_min:
        thetas.append(theta)
        theta /= cfg.theta_factor
    # a closing exact phase settles the active set without a threshold
    thetas.append(0.0)

    for theta in thetas:
        history = [structure.upper_bound(f)]
        while True:
            if cfg.max_iterations is not None and len(records) >= cfg.max_iterations:
                return f, "max_iterations"
            if cfg.time_limit is not None and time.perf_counter() - start > cfg.time_limit:
                return f, "time_limit"
            try:
                step = improve_once(structure, f, pcfg, theta)
            except InfeasibleInstance:
                return f, "infeasible"
            if step is None:
                break
            if on_step is not None:
                on_step(f, step, theta)
            f = step.weights
            bound = structure.upper_bound(f)
            records.append(
                IterationRecord(
                    len(records) + 1, bound, theta, step.alpha, step.certificate.nnz,
                    time.perf_counter() - start,
                )
            )
            history.append(bound)
            if len(history) > cfg.stall_window and history[-cfg.stall_window - 1] - bound < cfg.stall_epsilon:
                log.debug("stall at theta=%g", theta)
                break
    return f, "fixpoint"


def solve(
    structure: WcspStructure, g: np.ndarray, cfg: SolverConfig | None = None, on_step=None
) -> SolverReport:
    """Minimize the bound of ``g`` over super-reparametrizations (or
    reparametrizations in ``vac`` mode) with capacity scaling.

    The singleton and cycle modes first run the ``vac`` descent and continue
    from its result unless ``cfg.vac_prepass`` is off.  Unary scopes are added
    where missing; the report carries the structure the returned weights live
    on.  The bound is valid whenever the run stops, including on time or
    iteration limits.

    ``on_step(f, step, theta)`` is called before every accepted step.
    """
    cfg = cfg or SolverConfig()
    start = time.perf_counter()
    structure, f = structure.with_unary_scopes(g)
    pcfg = _propagator_config(structure, cfg.mode)
    records: list[IterationRecord] = []
    try:
        check_feasible_scopes(structure, f)
    except InfeasibleInstance:
        return SolverReport(-math.inf, structure, f, "infeasible", ())

    stages = [pcfg]
    if cfg.mode != "vac" and cfg.vac_prepass:
        stages.insert(0, PropagatorConfig("ac"))
    reason = "fixpoint"
    for stage in stages:
        f, reason = _descend(structure, f, stage, cfg, records, start, on_step)
        if reason != "fixpoint":
            break
    bound = -math.inf if reason == "infeasible" else structure.upper_bound(f)
    return SolverReport(bound, structure, f, reason, tuple(records))


def vac_prepass(structure: WcspStructure, g: np.ndarray, **kwargs) -> np.ndarray:
    """Reparametrization of ``g`` reached by AC-only improvement.

    The result lives on ``structure.with_unary_scopes()[0]``.
    """
    return solve(structure, g, SolverConfig(mode="vac", **kwargs)).weights
