"""Lowering of typed FPL programs to quantifier-free z3 problems.

Ground symbols are named ``name__i1__i2`` (index elements in declaration
order); fluents and actions carry the timestep as their last index.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Iterator, Sequence

import z3

from ..fpl import ast as A
from ..fpl.typecheck import STEP_SET, TIME_SET, SortEnv
from ..strips import GroundAction
from .horizon import emit_exactly_one_action, emit_frame_axioms

DEFAULT_UNROLL_CAP = 10**6


class LoweringError(Exception):
    pass


class SetTooLarge(LoweringError):
    pass


class UnsupportedConstruct(LoweringError):
    pass


class IndexOutOfRange(LoweringError):
    pass


def symbol_name(name: str, index: Sequence[Any] = ()) -> str:
    return "__".join([name, *(str(i) for i in index)])


@dataclass
class SmtProblem:
    """A ground optimization problem together with the maps decoding needs."""

    ctx: z3.Context
    variables: dict[str, z3.ExprRef] = field(default_factory=dict)
    assertions: list[z3.BoolRef] = field(default_factory=list)
    objective: tuple[str, z3.ExprRef] | None = None
    # declared family -> {index tuple: symbol name}
    families: dict[str, dict[tuple, str]] = field(default_factory=dict)
    family_sorts: dict[str, str] = field(default_factory=dict)
    horizon: int | None = None
    # ground actions with their per-step literals
    actions: list[tuple[GroundAction, list[z3.BoolRef]]] = field(default_factory=list)
    fluents: dict[tuple, list[z3.BoolRef]] = field(default_factory=dict)

    def term(self, family: str, index: Sequence[Any] = ()) -> z3.ExprRef:
        return self.variables[self.families[family][tuple(index)]]

    def step_literals(self, t: int) -> list[tuple[GroundAction, z3.BoolRef]]:
        return [(ga, lits[t]) for ga, lits in self.actions]


def to_z3(value: Any, ctx: z3.Context) -> z3.ExprRef:
    if isinstance(value, z3.ExprRef):
        return value
    if isinstance(value, bool):
        return z3.BoolVal(value, ctx)
    if isinstance(value, int):
        return z3.IntVal(value, ctx)
    if isinstance(value, Fraction):
        return z3.RealVal(f"{value.numerator}/{value.denominator}", ctx)
    raise UnsupportedConstruct(f"cannot use {value!r} as a solver term")


def _is_const(v: Any) -> bool:
    return not isinstance(v, z3.ExprRef)


class _Lowerer:
    def __init__(self, prog: A.Program, env: SortEnv, horizon: int | None, cap: int, exactly_one: str):
        self.exactly_one = exactly_one
        self.prog = prog
        self.env = env
        self.cap = cap
        self.ctx = z3.Context()
        self.problem = SmtProblem(self.ctx, horizon=horizon)
        self.sets: dict[str, tuple] = dict(env.sets)
        if env.horizon is not None:
            if horizon is None or horizon < 0:
                raise LoweringError("a horizon program needs a non-negative horizon value")
            self.sets[TIME_SET] = tuple(range(horizon + 1))
            self.sets[STEP_SET] = tuple(range(horizon))
        self.horizon = horizon
        self.work = 0
        self.ground_actions: dict[str, dict[tuple, list[z3.BoolRef]]] = {}

    # -- bookkeeping -----------------------------------------------------------

    def tick(self, n: int = 1) -> None:
        self.work += n
        if self.work > self.cap:
            raise SetTooLarge(f"unrolling exceeds the cap of {self.cap} ground instances")

    def emit(self, formula: Any) -> None:
        if _is_const(formula):
            if formula is True:
                return
            formula = z3.BoolVal(bool(formula), self.ctx)
        self.tick()
        self.problem.assertions.append(formula)

    def declare(self, family: str, sort: str, index_sets: Sequence[str]) -> None:
        mk = {"Int": z3.Int, "Real": z3.Real, "Bool": z3.Bool}[sort]
        members: dict[tuple, str] = {}
        for key in self.product([self.sets[s] for s in index_sets]):
            name = symbol_name(family, key)
            self.problem.variables[name] = mk(name, self.ctx)
            members[key] = name
        self.problem.families[family] = members
        self.problem.family_sorts[family] = sort

    def product(self, domains: Sequence[Sequence[Any]]) -> Iterator[tuple]:
        size = math.prod(len(d) for d in domains)
        if size > self.cap:
            raise SetTooLarge(f"index product of size {size} exceeds the cap of {self.cap}")
        self.tick(size)
        return itertools.product(*domains)

    # -- program ---------------------------------------------------------------

    def run(self) -> SmtProblem:
        for d in self.prog.decls:
            self.declare(d.name, d.sort, d.index)
        if self.env.horizon is not None:
            self.lower_strips()
        for s in self.prog.asserts:
            self.lower_assert(s.expr, {})
        obj = self.prog.objective
        if obj is not None:
            term = self.expr(obj.expr, {})
            self.problem.objective = (obj.direction, to_z3(term, self.ctx))
        return self.problem

    def lower_assert(self, e: A.Expr, scope: dict[str, Any]) -> None:
        # top-level universals become one ground assertion per instance
        if isinstance(e, A.Quant) and e.op == "forall":
            for inner in self.instances(e.binders, e.where, scope):
                self.lower_assert(e.body, inner)
            return
        if isinstance(e, A.Binary) and e.op == "and":
            self.lower_assert(e.left, scope)
            self.lower_assert(e.right, scope)
            return
        self.emit(self.expr(e, scope))

    def instances(self, binders, where, scope) -> Iterator[dict[str, Any]]:
        domains = [self.sets[b.set_name] for b in binders]
        for values in self.product(domains):
            inner = dict(scope)
            inner.update({b.var: v for b, v in zip(binders, values)})
            if where is not None:
                keep = self.expr(where, inner)
                if not _is_const(keep):
                    raise UnsupportedConstruct("'where' filters must be constant")
                if not keep:
                    continue
            yield inner

    # -- multi-step ------------------------------------------------------------

    def ground_atom(self, atom: A.Atom, scope) -> tuple:
        return (atom.fluent, *(self.index_value(a, scope) for a in atom.args))

    def lower_strips(self) -> None:
        T = self.horizon
        problem = self.problem
        for f in self.prog.fluents:
            self.declare(f.name, "Bool", (*f.index, TIME_SET))
            for key in self.product([self.sets[s] for s in f.index]):
                problem.fluents[(f.name, *key)] = [problem.term(f.name, (*key, t)) for t in range(T + 1)]
        for a in self.prog.actions:
            members: dict[tuple, str] = {}
            grounded: dict[tuple, list[z3.BoolRef]] = {}
            for inner in self.instances(a.params, a.where, {}):
                args = tuple(inner[b.var] for b in a.params)
                ga = GroundAction(
                    a.name,
                    args,
                    frozenset(self.ground_atom(x, inner) for x in a.pre),
                    frozenset(self.ground_atom(x, inner) for x in a.add),
                    frozenset(self.ground_atom(x, inner) for x in a.delete),
                )
                lits = []
                for t in range(T):
                    name = symbol_name(a.name, (*args, t))
                    problem.variables[name] = z3.Bool(name, self.ctx)
                    members[(*args, t)] = name
                    lits.append(problem.variables[name])
                grounded[args] = lits
                problem.actions.append((ga, lits))
            problem.families[a.name] = members
            problem.family_sorts[a.name] = "Bool"
            self.ground_actions[a.name] = grounded

        for ga, lits in problem.actions:
            for atom in ga.pre:
                if atom not in problem.fluents:
                    raise IndexOutOfRange(f"{ga.label}: precondition {atom} is not a ground fluent")
            for t, lit in enumerate(lits):
                for atom in sorted(ga.pre, key=repr):
                    self.emit(z3.Implies(lit, problem.fluents[atom][t]))
        for f in emit_frame_axioms(problem.fluents, problem.actions, T):
            self.emit(f)
        steps = [[lits[t] for _, lits in problem.actions] for t in range(T)]
        for f in emit_exactly_one_action(steps, self.exactly_one, ctx=self.ctx):
            self.emit(f)

        init = set()
        for d in self.prog.inits:
            init.update(self.ground_atom(x, {}) for x in d.atoms)
        for atom in init:
            if atom not in problem.fluents:
                raise IndexOutOfRange(f"initial atom {atom} is not a ground fluent")
        for atom, terms in problem.fluents.items():
            self.emit(terms[0] if atom in init else z3.Not(terms[0]))
        for d in self.prog.goals:
            for x in d.atoms:
                atom = self.ground_atom(x, {})
                if atom not in problem.fluents:
                    raise IndexOutOfRange(f"goal atom {atom} is not a ground fluent")
                self.emit(problem.fluents[atom][T])

    # -- expressions -----------------------------------------------------------

    def index_value(self, e: A.Expr, scope) -> Any:
        v = self.expr(e, scope)
        if not _is_const(v):
            raise UnsupportedConstruct("index expressions must be constant")
        return v

    def lookup(self, ident: str, args: tuple, pos: A.Pos) -> Any:
        sym = self.env.symbols[ident]
        sig = sym.signature
        for v, set_name in zip(args, sig):
            if v not in self.sets[set_name]:
                raise IndexOutOfRange(f"{pos}: {v!r} is outside {set_name} in {ident}[...]")
        if sym.kind == "param":
            return self.env.params[ident][args]
        if sym.kind == "action":
            lits = self.ground_actions[ident].get(args[:-1])
            # an instance removed by the action's 'where' filter never happens
            return False if lits is None else lits[args[-1]]
        return self.problem.term(ident, args)

    def expr(self, e: A.Expr, scope: dict[str, Any]) -> Any:
        if isinstance(e, (A.IntLit, A.BoolLit, A.StrLit)):
            return e.value
        if isinstance(e, A.DecLit):
            return e.value
        if isinstance(e, A.Name):
            if e.ident in scope:
                return scope[e.ident]
            if e.ident == self.env.horizon:
                return self.horizon
            return self.lookup(e.ident, (), e.pos)
        if isinstance(e, A.Index):
            args = tuple(self.index_value(a, scope) for a in e.args)
            return self.lookup(e.ident, args, e.pos)
        if isinstance(e, A.Unary):
            v = self.expr(e.operand, scope)
            if e.op == "not":
                return (not v) if _is_const(v) else z3.Not(v)
            return -v
        if isinstance(e, A.Binary):
            return self.binary(e, scope)
        if isinstance(e, A.Quant):
            parts = [self.expr(e.body, inner) for inner in self.instances(e.binders, e.where, scope)]
            return self.fold_bool("and" if e.op == "forall" else "or", parts)
        if isinstance(e, A.Aggregate):
            parts = []
            for inner in self.instances(e.binders, e.where, scope):
                v = self.expr(e.body, inner)
                if e.op == "count":
                    v = int(v) if _is_const(v) else z3.If(v, z3.IntVal(1, self.ctx), z3.IntVal(0, self.ctx))
                parts.append(v)
            consts = [p for p in parts if _is_const(p)]
            terms = [p for p in parts if not _is_const(p)]
            total = sum(consts, 0)
            if not terms:
                return total
            out = z3.Sum(terms) if len(terms) > 1 else terms[0]
            return out + to_z3(total, self.ctx) if total != 0 else out
        if isinstance(e, A.Ite):
            c = self.expr(e.cond, scope)
            if _is_const(c):
                return self.expr(e.then if c else e.other, scope)
            a, b = self.expr(e.then, scope), self.expr(e.other, scope)
            return z3.If(c, to_z3(a, self.ctx), to_z3(b, self.ctx))
        if isinstance(e, A.Call):
            v = self.expr(e.arg, scope)
            if not _is_const(v):
                raise UnsupportedConstruct(f"{e.func} of a decision variable")
            return math.ceil(v) if e.func == "ceil" else math.floor(v)
        raise UnsupportedConstruct(f"cannot lower {type(e).__name__}")

    def fold_bool(self, op: str, parts: list) -> Any:
        terms = []
        for p in parts:
            if _is_const(p):
                if op == "and" and not p:
                    return False
                if op == "or" and p:
                    return True
            else:
                terms.append(p)
        if not terms:
            return op == "and"
        if len(terms) == 1:
            return terms[0]
        return z3.And(terms) if op == "and" else z3.Or(terms)

    def binary(self, e: A.Binary, scope) -> Any:
        op = e.op
        a = self.expr(e.left, scope)
        if op in ("and", "or") and _is_const(a):
            # short-circuit on constant guards
            if op == "and" and not a:
                return False
            if op == "or" and a:
                return True
        b = self.expr(e.right, scope)
        if op in ("and", "or"):
            return self.fold_bool(op, [a, b])
        if op == "->":
            if _is_const(a):
                return b if a else True
            return True if b is True else z3.Implies(a, to_z3(b, self.ctx))
        if op == "<->":
            if _is_const(a) and _is_const(b):
                return a == b
            return to_z3(a, self.ctx) == to_z3(b, self.ctx)
        const = _is_const(a) and _is_const(b)
        if op == "/":
            if not _is_const(b):
                raise UnsupportedConstruct("division by a decision variable")
            if b == 0:
                raise UnsupportedConstruct(f"{e.pos}: division by zero")
            inv = 1 / Fraction(b)
            return Fraction(a) * inv if const else a * to_z3(inv, self.ctx)
        if const:
            return {
                "+": lambda: a + b,
                "-": lambda: a - b,
                "*": lambda: a * b,
                "==": lambda: a == b,
                "!=": lambda: a != b,
                "<": lambda: a < b,
                "<=": lambda: a <= b,
                ">": lambda: a > b,
                ">=": lambda: a >= b,
            }[op]()
        za, zb = to_z3(a, self.ctx), to_z3(b, self.ctx)
        if op == "+":
            return za + zb
        if op == "-":
            return za - zb
        if op == "*":
            return za * zb
        if op == "==":
            return za == zb
        if op == "!=":
            return za != zb
        if op == "<":
            return za < zb
        if op == "<=":
            return za <= zb
        if op == ">":
            return za > zb
        if op == ">=":
            return za >= zb
        raise UnsupportedConstruct(f"operator {op!r}")


def lower(
    prog: A.Program,
    env: SortEnv,
    horizon: int | None = None,
    cap: int = DEFAULT_UNROLL_CAP,
    exactly_one: str = "pb",
) -> SmtProblem:
    """Ground ``prog`` into a fresh z3 context.

    ``horizon`` is required for programs with a ``horizon`` declaration and
    ignored otherwise.
    """
    if env.horizon is None:
        horizon = None
    return _Lowerer(prog, env, horizon, cap, exactly_one).run()


def to_smtlib(problem: SmtProblem) -> str:
    """SMT-LIB 2 text of the ground problem, objective included."""
    opt = z3.Optimize(ctx=problem.ctx)
    for a in problem.assertions:
        opt.add(a)
    if problem.objective is not None:
        direction, term = problem.objective
        (opt.minimize if direction == "minimize" else opt.maximize)(term)
    return opt.sexpr() + "(get-objectives)\n(get-model)\n"
