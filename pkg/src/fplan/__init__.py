"""Formalize planning problems as FPL constraint programs and solve them with z3."""

from .ir import PlanResult, ProblemInput
from .pipeline import PipelineConfig, solve_query

__version__ = "0.1.0"

__all__ = ["PipelineConfig", "PlanResult", "ProblemInput", "solve_query"]
