"""Upper bounds for weighted CSPs by iterative super-reparametrization."""
from .core import ACTIVE_TOL, OracleScaleError, WcspStructure
from .directions import (
    DeactivatingCertificate,
    PropagationTrace,
    ac_support_direction,
    chosen_indices,
    compose_pair,
    compose_trace,
    generic_direction,
    verify_certificate,
)
from .optimizer import SolverConfig, SolverReport, improve_once, line_search, apply_step, solve, vac_prepass
from .propagators import PropagatorConfig, ac_step, cc_step, edac_check, propagate, sac_step, select_cycles
from .wcspio import emit_native, normalized_bound, parse_native, parse_wcsp_file

__version__ = "0.1.0"
