"""FPL: a small constraint-modeling language lowered to SMT."""

from .ast import Program
from .parser import FplSyntaxError, parse, parse_expr
from .printer import print_program
from .typecheck import (
    DuplicateDeclaration,
    FplTypeError,
    IndexArityMismatch,
    ParamDataError,
    SortEnv,
    SortMismatch,
    UnboundIdentifier,
    typecheck,
)

__all__ = [
    "DuplicateDeclaration",
    "FplSyntaxError",
    "FplTypeError",
    "IndexArityMismatch",
    "ParamDataError",
    "Program",
    "SortEnv",
    "SortMismatch",
    "UnboundIdentifier",
    "parse",
    "parse_expr",
    "print_program",
    "typecheck",
]
