"""Shared machinery for the multi-step property checks."""

from __future__ import annotations

import random

import z3

from fplan.domains import get_domain
from fplan.fpl import parse, typecheck
from fplan.smt import lower
from fplan.strips import replay

MULTI_STEP = ("blocksworld", "mystery_blocksworld", "gripper", "movie")


def random_walk(domain, case, steps: int, rng: random.Random):
    """A random applicable action sequence from the case's initial state."""
    actions = domain.ground_actions(case)
    state = domain.init(case)
    plan = []
    for _ in range(steps):
        options = [a for a in actions if a.pre <= state]
        if not options:
            break
        a = rng.choice(options)
        plan.append(a)
        state = a.apply(state)
    return plan


def lowered_without_goal(domain, case, horizon: int, exactly_one: str = "pb"):
    prog = parse(domain.program_source(case, with_goal=False))
    env = typecheck(prog, domain.problem_input(case).data_tables())
    return lower(prog, env, horizon=horizon, exactly_one=exactly_one)


def smt_trace(domain, case, plan, exactly_one: str = "pb"):
    """States the encoding forces when ``plan``'s actions are assumed true.

    Returns (trace, error) where trace is a list of atom sets per step.
    """
    problem = lowered_without_goal(domain, case, len(plan), exactly_one)
    lits = {ga.label: ls for ga, ls in problem.actions}
    s = z3.Solver(ctx=problem.ctx)
    s.add(problem.assertions)
    assumptions = [lits[a.label][t] for t, a in enumerate(plan)]
    if s.check(*assumptions) != z3.sat:
        return None, "encoding rejects an applicable action sequence"
    m = s.model()
    trace = []
    for t in range(len(plan) + 1):
        trace.append(frozenset(atom for atom, terms in problem.fluents.items() if z3.is_true(m.eval(terms[t], model_completion=True))))
    return trace, None


def frame_violations(domain, case, plan) -> list[str]:
    expected = replay(domain.init(case), plan)
    got, err = smt_trace(domain, case, plan)
    if err:
        return [err]
    out = []
    for t, (a, b) in enumerate(zip(expected, got)):
        if a != b:
            out.append(f"step {t}: simulator-only {sorted(a - b)} encoding-only {sorted(b - a)}")
    return out


def second_action_is_unsat(domain, case, plan, t: int, rng: random.Random, exactly_one: str = "pb") -> bool:
    """Assert the plan plus one more action at step ``t``; True when unsat."""
    problem = lowered_without_goal(domain, case, len(plan), exactly_one)
    by_label = {ga.label: ls for ga, ls in problem.actions}
    others = [label for label in by_label if label != plan[t].label]
    extra = rng.choice(others)
    s = z3.Solver(ctx=problem.ctx)
    s.add(problem.assertions)
    s.add(*[by_label[a.label][i] for i, a in enumerate(plan)])
    s.add(by_label[extra][t])
    return s.check() == z3.unsat


def actions_per_step(problem, model) -> list[int]:
    T = problem.horizon or 0
    return [sum(1 for _, lits in problem.actions if model.get(lits[t].decl().name()) is True) for t in range(T)]


def domain_cases(domain_id):
    d = get_domain(domain_id)
    return d, d.cases
