"""Lowering FPL to SMT, solving, bounded-horizon search and plan decoding."""

from .decode import DecodeError, PlanSchema, SchemaMismatch, decode, decode_actions
from .horizon import UnknownPredicate, emit_exactly_one_action, emit_frame_axioms
from .lower import (
    IndexOutOfRange,
    LoweringError,
    SetTooLarge,
    SmtProblem,
    UnsupportedConstruct,
    lower,
    symbol_name,
    to_smtlib,
)
from .solve import (
    DEFAULT_TIMEOUT,
    HorizonConfig,
    SolveOutcome,
    SolverError,
    TMaxExceeded,
    solve,
    solve_bounded_horizon,
)

__all__ = [
    "DEFAULT_TIMEOUT",
    "DecodeError",
    "HorizonConfig",
    "IndexOutOfRange",
    "LoweringError",
    "PlanSchema",
    "SchemaMismatch",
    "SetTooLarge",
    "SmtProblem",
    "SolveOutcome",
    "SolverError",
    "TMaxExceeded",
    "UnknownPredicate",
    "UnsupportedConstruct",
    "decode",
    "decode_actions",
    "emit_exactly_one_action",
    "emit_frame_axioms",
    "lower",
    "solve",
    "solve_bounded_horizon",
    "symbol_name",
    "to_smtlib",
]
