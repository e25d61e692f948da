"""Solver driver: one z3 session per call, with wall-clock caps."""

from __future__ import annotations

import threading
import time
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any

import z3

from ..fpl import ast as A
from ..fpl.typecheck import SortEnv
from .lower import DEFAULT_UNROLL_CAP, SmtProblem, lower

DEFAULT_TIMEOUT = 15 * 60.0
SOLVER_NAME = "z3"
# extra time the watchdog allows beyond the solver's own timeout
_GRACE = 0.5


class SolverError(Exception):
    pass


class TMaxExceeded(Exception):
    def __init__(self, t_max: int):
        super().__init__(f"no plan within horizon {t_max}")
        self.t_max = t_max


@dataclass(frozen=True)
class SolveOutcome:
    status: str  # sat | unsat | timeout | solver_error
    model: dict[str, Any] | None = None
    objective_value: int | Fraction | None = None
    duration: float = field(default=0.0, compare=False)
    solver: str = SOLVER_NAME
    detail: str = ""
    problem: SmtProblem | None = field(default=None, compare=False, repr=False)

    def __post_init__(self):
        if (self.status == "sat") != (self.model is not None):
            raise ValueError("a model is present exactly when the status is sat")


@dataclass(frozen=True)
class HorizonConfig:
    t_start: int = 0
    t_max: int = 30
    per_check_timeout: float = DEFAULT_TIMEOUT
    total_timeout: float = DEFAULT_TIMEOUT

    def __post_init__(self):
        if self.t_start < 0 or self.t_start > self.t_max:
            raise ValueError("need 0 <= t_start <= t_max")
        if self.per_check_timeout <= 0 or self.total_timeout <= 0:
            raise ValueError("timeouts must be positive")


def model_value(v: z3.ExprRef) -> Any:
    if z3.is_true(v):
        return True
    if z3.is_false(v):
        return False
    if z3.is_int_value(v):
        return v.as_long()
    if z3.is_rational_value(v):
        f = v.as_fraction()
        return f.numerator if f.denominator == 1 else f
    raise SolverError(f"model value {v} is not a number or boolean")


def solve(problem: SmtProblem, timeout: float = DEFAULT_TIMEOUT, seed: int = 0) -> SolveOutcome:
    """Check ``problem`` and, when it has an objective, optimize it.

    A timeout is reported as status ``timeout``; a model found before the
    optimizer finished is never returned as optimal.
    """
    ctx = problem.ctx
    engine = z3.Optimize(ctx=ctx) if problem.objective is not None else z3.Solver(ctx=ctx)
    engine.set("timeout", max(1, int(timeout * 1000)))
    if isinstance(engine, z3.Solver):
        engine.set("random_seed", seed)
    for a in problem.assertions:
        engine.add(a)
    handle = None
    if problem.objective is not None:
        direction, term = problem.objective
        handle = engine.minimize(term) if direction == "minimize" else engine.maximize(term)

    watchdog = threading.Timer(timeout + _GRACE, ctx.interrupt)
    watchdog.daemon = True
    start = time.monotonic()
    watchdog.start()
    try:
        result = engine.check()
    except z3.Z3Exception as exc:
        return SolveOutcome("solver_error", detail=str(exc), duration=time.monotonic() - start, problem=problem)
    finally:
        watchdog.cancel()
    duration = time.monotonic() - start

    if result == z3.unsat:
        return SolveOutcome("unsat", duration=duration, problem=problem)
    if result == z3.unknown:
        reason = engine.reason_unknown()
        timed_out = duration >= timeout or any(w in reason for w in ("timeout", "canceled", "interrupted"))
        status = "timeout" if timed_out else "solver_error"
        return SolveOutcome(status, detail=reason, duration=duration, problem=problem)

    m = engine.model()
    try:
        model = {name: model_value(m.eval(term, model_completion=True)) for name, term in problem.variables.items()}
        objective = None
        if handle is not None:
            bound = handle.value()
            if not (z3.is_int_value(bound) or z3.is_rational_value(bound)):
                return SolveOutcome("solver_error", detail=f"unbounded objective ({bound})", duration=duration, problem=problem)
            objective = model_value(m.eval(problem.objective[1], model_completion=True))
    except SolverError as exc:
        return SolveOutcome("solver_error", detail=str(exc), duration=duration, problem=problem)
    return SolveOutcome("sat", model, objective, duration, problem=problem)


def solve_bounded_horizon(
    prog: A.Program,
    env: SortEnv,
    cfg: HorizonConfig = HorizonConfig(),
    cap: int = DEFAULT_UNROLL_CAP,
    exactly_one: str = "pb",
) -> tuple[SolveOutcome, int]:
    """Smallest horizon in ``[t_start, t_max]`` admitting a plan.

    Every smaller horizon in range has been proven unsat when this returns a
    sat outcome.  Exhausting the total time budget returns a timeout outcome
    for the horizon being checked.
    """
    deadline = time.monotonic() + cfg.total_timeout
    for T in range(cfg.t_start, cfg.t_max + 1):
        remaining = deadline - time.monotonic()
        if remaining <= 0:
            return SolveOutcome("timeout", detail="total horizon budget exhausted"), T
        problem = lower(prog, env, horizon=T, cap=cap, exactly_one=exactly_one)
        outcome = solve(problem, min(cfg.per_check_timeout, remaining))
        if outcome.status != "unsat":
            return outcome, T
    raise TMaxExceeded(cfg.t_max)
