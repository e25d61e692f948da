"""Static checking of FPL programs against background data.

``typecheck`` resolves every set and parameter table, assigns a sort to each
expression and returns the ``SortEnv`` consumed by lowering.  Declarations
are collected before any use is checked, so statement order does not matter.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Any, Iterable, Mapping

from . import ast as A

TIME_SET = "Time"
STEP_SET = "Step"


class FplTypeError(Exception):
    def __init__(self, message: str, pos: A.Pos = A.NOPOS):
        super().__init__(f"{pos.line}:{pos.col}: {message}")
        self.message = message
        self.pos = pos

    @property
    def line(self) -> int:
        return self.pos.line

    @property
    def col(self) -> int:
        return self.pos.col

    def format(self, filename: str = "<fpl>") -> str:
        return f"{filename}:{self.pos.line}:{self.pos.col}: {type(self).__name__}: {self.message}"


class UnboundIdentifier(FplTypeError):
    pass


class SortMismatch(FplTypeError):
    pass


class IndexArityMismatch(FplTypeError):
    pass


class DuplicateDeclaration(FplTypeError):
    pass


class ParamDataError(FplTypeError):
    pass


@dataclass(frozen=True)
class Symbol:
    name: str
    kind: str  # set | param | var | fluent | action | horizon
    sort: str | None = None
    index: tuple[str, ...] = ()
    decl: Any = None

    @property
    def signature(self) -> tuple[str, ...]:
        """Full index signature including the implicit time index."""
        if self.kind == "fluent":
            return self.index + (TIME_SET,)
        if self.kind == "action":
            return self.index + (STEP_SET,)
        return self.index


@dataclass(frozen=True)
class Ty:
    sort: str  # Int | Real | Bool | Elem
    const: bool
    elem_set: str | None = None


@dataclass
class SortEnv:
    """Typing environment plus the resolved data lowering needs."""

    symbols: dict[str, Symbol] = field(default_factory=dict)
    sets: dict[str, tuple] = field(default_factory=dict)
    params: dict[str, dict[tuple, Any]] = field(default_factory=dict)
    horizon: str | None = None

    def sort_of(self, name: str) -> tuple[str | None, tuple[str, ...]]:
        sym = self.symbols[name]
        return sym.sort, sym.signature

    def is_int_set(self, name: str) -> bool:
        if name in (TIME_SET, STEP_SET) and self.horizon:
            return True
        elems = self.sets.get(name, ())
        return all(isinstance(e, int) for e in elems)

    def summary(self) -> dict[str, tuple[str | None, tuple[str, ...]]]:
        return {n: (s.sort, s.signature) for n, s in sorted(self.symbols.items()) if s.kind in ("var", "fluent", "action")}


_NUMERIC = ("Int", "Real")


def _check_leaf(value: Any, sort: str, where: str, pos: A.Pos) -> Any:
    if sort == "Bool":
        if isinstance(value, bool):
            return value
    elif sort == "Int":
        if isinstance(value, int) and not isinstance(value, bool):
            return value
        if isinstance(value, (float, Fraction)) and Fraction(value).denominator == 1:
            return int(value)
    elif sort == "Real":
        if isinstance(value, (int, float, Fraction)) and not isinstance(value, bool):
            return Fraction(repr(value)) if isinstance(value, float) else Fraction(value)
    raise ParamDataError(f"{where}: value {value!r} is not of sort {sort}", pos)


class _Checker:
    def __init__(self, prog: A.Program, background: Mapping[str, Any]):
        self.prog = prog
        self.background = background
        self.env = SortEnv()

    # -- declarations ----------------------------------------------------------

    def declare(self, sym: Symbol, pos: A.Pos) -> None:
        if sym.name in self.env.symbols:
            raise DuplicateDeclaration(f"{sym.name!r} is declared twice", pos)
        self.env.symbols[sym.name] = sym

    def collect(self) -> None:
        horizons = [s for s in self.prog.statements if isinstance(s, A.HorizonDecl)]
        if len(horizons) > 1:
            raise DuplicateDeclaration("at most one horizon declaration is allowed", horizons[1].pos)
        if horizons:
            h = horizons[0]
            self.env.horizon = h.name
            self.declare(Symbol(h.name, "horizon", "Int"), h.pos)
            self.declare(Symbol(TIME_SET, "set"), h.pos)
            self.declare(Symbol(STEP_SET, "set"), h.pos)
        objectives = self.prog.objectives
        if len(objectives) > 1:
            raise DuplicateDeclaration("at most one objective is allowed", objectives[1].pos)

        for s in self.prog.statements:
            if isinstance(s, A.SetDecl):
                self.declare(Symbol(s.name, "set", decl=s), s.pos)
                self.env.sets[s.name] = self.resolve_set(s)
        for s in self.prog.statements:
            if isinstance(s, A.ParamDecl):
                self.check_index_sets(s.index, s.pos)
                self.declare(Symbol(s.name, "param", s.sort, s.index, s), s.pos)
                self.env.params[s.name] = self.resolve_param(s)
            elif isinstance(s, A.VarDecl):
                self.check_index_sets(s.index, s.pos)
                self.declare(Symbol(s.name, "var", s.sort, s.index, s), s.pos)
            elif isinstance(s, A.FluentDecl):
                self.require_horizon("fluent", s.pos)
                self.check_index_sets(s.index, s.pos)
                self.declare(Symbol(s.name, "fluent", "Bool", s.index, s), s.pos)
            elif isinstance(s, A.ActionDecl):
                self.require_horizon("action", s.pos)
                sets = tuple(b.set_name for b in s.params)
                self.check_index_sets(sets, s.pos)
                self.declare(Symbol(s.name, "action", "Bool", sets, s), s.pos)
            elif isinstance(s, (A.InitDecl, A.GoalDecl)):
                self.require_horizon("init" if isinstance(s, A.InitDecl) else "goal", s.pos)

    def require_horizon(self, what: str, pos: A.Pos) -> None:
        if self.env.horizon is None:
            raise UnboundIdentifier(f"{what} declarations need a 'horizon' declaration", pos)

    def check_index_sets(self, names: Iterable[str], pos: A.Pos) -> None:
        for n in names:
            sym = self.env.symbols.get(n)
            if sym is None or sym.kind != "set":
                raise UnboundIdentifier(f"unknown index set {n!r}", pos)
            if n in (TIME_SET, STEP_SET):
                raise SortMismatch(f"{n!r} is implicit and cannot be listed in an index signature", pos)

    def resolve_set(self, s: A.SetDecl) -> tuple:
        if s.elements is not None:
            elems = tuple(s.elements)
        elif s.range_ is not None:
            lo, hi = s.range_
            elems = tuple(range(lo, hi + 1))
        else:
            if s.name not in self.background:
                raise UnboundIdentifier(f"set {s.name!r} has no elements and no background table", s.pos)
            data = self.background[s.name]
            if not isinstance(data, (list, tuple)):
                raise ParamDataError(f"background table {s.name!r} is not a list of elements", s.pos)
            elems = tuple(data)
        for e in elems:
            if isinstance(e, bool) or not isinstance(e, (str, int)):
                raise ParamDataError(f"set {s.name!r} element {e!r} is not a string or integer", s.pos)
        if len(set(elems)) != len(elems):
            raise ParamDataError(f"set {s.name!r} has duplicate elements", s.pos)
        kinds = {type(e) for e in elems}
        if len(kinds) > 1:
            raise ParamDataError(f"set {s.name!r} mixes string and integer elements", s.pos)
        return elems

    def resolve_param(self, p: A.ParamDecl) -> dict[tuple, Any]:
        if p.value is not None:
            data = p.value
        elif p.name in self.background:
            data = self.background[p.name]
        else:
            raise UnboundIdentifier(f"parameter {p.name!r} has no value and no background table", p.pos)
        out: dict[tuple, Any] = {}

        def walk(node: Any, depth: int, key: tuple) -> None:
            if depth == len(p.index):
                if isinstance(node, (dict, list, tuple)):
                    raise IndexArityMismatch(
                        f"parameter {p.name!r} data has more than {len(p.index)} index level(s)", p.pos
                    )
                out[key] = _check_leaf(node, p.sort, p.name, p.pos)
                return
            set_name = p.index[depth]
            elems = self.env.sets[set_name]
            if isinstance(node, dict):
                lookup = {str(k): v for k, v in node.items()}
                for e in elems:
                    if str(e) not in lookup:
                        raise ParamDataError(f"parameter {p.name!r} has no entry for {e!r} of {set_name}", p.pos)
                    walk(lookup[str(e)], depth + 1, key + (e,))
            elif isinstance(node, (list, tuple)) and all(isinstance(e, int) for e in elems):
                lo = min(elems) if elems else 0
                for e in elems:
                    if not 0 <= e - lo < len(node):
                        raise ParamDataError(f"parameter {p.name!r} list is too short for {set_name}", p.pos)
                    walk(node[e - lo], depth + 1, key + (e,))
            else:
                raise IndexArityMismatch(
                    f"parameter {p.name!r} data has fewer index levels than its signature {list(p.index)}", p.pos
                )

        walk(data, 0, ())
        return out

    # -- statements ------------------------------------------------------------

    def check(self) -> SortEnv:
        self.collect()
        for s in self.prog.statements:
            if isinstance(s, A.Assert):
                self.expect_sort(s.expr, {}, ("Bool",), "assertion")
            elif isinstance(s, A.Objective):
                self.expect_sort(s.expr, {}, _NUMERIC, "objective")
            elif isinstance(s, A.ActionDecl):
                scope = self.bind(s.params, {})
                if s.where is not None:
                    self.expect_const_bool(s.where, scope, "action 'where' filter")
                for atom in s.pre + s.add + s.delete:
                    self.check_atom(atom, scope)
            elif isinstance(s, (A.InitDecl, A.GoalDecl)):
                for atom in s.atoms:
                    self.check_atom(atom, {})
        return self.env

    def bind(self, binders: tuple[A.Binder, ...], scope: dict[str, Ty]) -> dict[str, Ty]:
        scope = dict(scope)
        for b in binders:
            sym = self.env.symbols.get(b.set_name)
            if sym is None or sym.kind != "set":
                raise UnboundIdentifier(f"unknown set {b.set_name!r}", b.pos)
            if b.var in scope or b.var in self.env.symbols:
                raise DuplicateDeclaration(f"bound variable {b.var!r} shadows an existing name", b.pos)
            sort = "Int" if self.env.is_int_set(b.set_name) else "Elem"
            scope[b.var] = Ty(sort, True, b.set_name)
        return scope

    def check_atom(self, atom: A.Atom, scope: dict[str, Ty]) -> None:
        sym = self.env.symbols.get(atom.fluent)
        if sym is None:
            raise UnboundIdentifier(f"unknown fluent {atom.fluent!r}", atom.pos)
        if sym.kind != "fluent":
            raise SortMismatch(f"{atom.fluent!r} is a {sym.kind}, not a fluent", atom.pos)
        if len(atom.args) != len(sym.index):
            raise IndexArityMismatch(
                f"fluent {atom.fluent!r} takes {len(sym.index)} argument(s), got {len(atom.args)}", atom.pos
            )
        for arg, set_name in zip(atom.args, sym.index):
            self.check_index_arg(arg, set_name, scope)

    def expect_sort(self, e: A.Expr, scope, sorts: tuple[str, ...], what: str) -> Ty:
        ty = self.expr(e, scope)
        if ty.sort not in sorts:
            raise SortMismatch(f"{what} must be {' or '.join(sorts)}, got {ty.sort}", e.pos)
        return ty

    def expect_const_bool(self, e: A.Expr, scope, what: str) -> None:
        ty = self.expect_sort(e, scope, ("Bool",), what)
        if not ty.const:
            raise SortMismatch(f"{what} may not mention decision variables", e.pos)

    def check_index_arg(self, arg: A.Expr, set_name: str, scope) -> None:
        ty = self.expr(arg, scope)
        if not ty.const:
            raise SortMismatch("index expressions may not mention decision variables", arg.pos)
        if self.env.is_int_set(set_name):
            if ty.sort != "Int":
                raise SortMismatch(f"index into integer set {set_name!r} must be Int, got {ty.sort}", arg.pos)
            return
        if ty.sort != "Elem":
            raise SortMismatch(f"index into set {set_name!r} must be an element, got {ty.sort}", arg.pos)
        target = set(self.env.sets[set_name])
        if isinstance(arg, A.StrLit):
            if arg.value not in target:
                raise SortMismatch(f"{arg.value!r} is not an element of {set_name!r}", arg.pos)
        elif ty.elem_set is not None and ty.elem_set != set_name:
            if not set(self.env.sets[ty.elem_set]) <= target:
                raise SortMismatch(f"elements of {ty.elem_set!r} are not all in {set_name!r}", arg.pos)

    # -- expressions -----------------------------------------------------------

    def expr(self, e: A.Expr, scope: dict[str, Ty]) -> Ty:
        if isinstance(e, A.IntLit):
            return Ty("Int", True)
        if isinstance(e, A.DecLit):
            return Ty("Real", True)
        if isinstance(e, A.BoolLit):
            return Ty("Bool", True)
        if isinstance(e, A.StrLit):
            return Ty("Elem", True)
        if isinstance(e, A.Name):
            if e.ident in scope:
                return scope[e.ident]
            sym = self.env.symbols.get(e.ident)
            if sym is None:
                raise UnboundIdentifier(f"unknown identifier {e.ident!r}", e.pos)
            if sym.kind == "horizon":
                return Ty("Int", True)
            if sym.kind == "set":
                raise SortMismatch(f"set {e.ident!r} cannot be used as a value", e.pos)
            if sym.signature:
                raise IndexArityMismatch(f"{e.ident!r} needs {len(sym.signature)} index argument(s)", e.pos)
            return Ty(sym.sort, sym.kind == "param")
        if isinstance(e, A.Index):
            sym = self.env.symbols.get(e.ident)
            if sym is None:
                raise UnboundIdentifier(f"unknown identifier {e.ident!r}", e.pos)
            if sym.kind in ("set", "horizon"):
                raise SortMismatch(f"{e.ident!r} is a {sym.kind} and cannot be indexed", e.pos)
            sig = sym.signature
            if len(e.args) != len(sig):
                raise IndexArityMismatch(
                    f"{e.ident!r} is indexed by {len(sig)} set(s) {list(sig)}, got {len(e.args)} argument(s)", e.pos
                )
            for arg, set_name in zip(e.args, sig):
                self.check_index_arg(arg, set_name, scope)
            return Ty(sym.sort, sym.kind == "param")
        if isinstance(e, A.Unary):
            if e.op == "not":
                ty = self.expect_sort(e.operand, scope, ("Bool",), "operand of 'not'")
                return Ty("Bool", ty.const)
            ty = self.expect_sort(e.operand, scope, _NUMERIC, "operand of unary '-'")
            return Ty(ty.sort, ty.const)
        if isinstance(e, A.Binary):
            return self.binary(e, scope)
        if isinstance(e, (A.Aggregate, A.Quant)):
            inner = self.bind(e.binders, scope)
            if e.where is not None:
                self.expect_const_bool(e.where, inner, "'where' filter")
            if isinstance(e, A.Quant):
                ty = self.expect_sort(e.body, inner, ("Bool",), f"body of '{e.op}'")
                return Ty("Bool", ty.const)
            if e.op == "count":
                ty = self.expect_sort(e.body, inner, ("Bool",), "body of 'count'")
                return Ty("Int", ty.const)
            ty = self.expect_sort(e.body, inner, _NUMERIC, "body of 'sum'")
            return Ty(ty.sort, ty.const)
        if isinstance(e, A.Ite):
            cond = self.expect_sort(e.cond, scope, ("Bool",), "ite condition")
            a = self.expr(e.then, scope)
            b = self.expr(e.other, scope)
            const = cond.const and a.const and b.const
            if a.sort in _NUMERIC and b.sort in _NUMERIC:
                return Ty("Real" if "Real" in (a.sort, b.sort) else "Int", const)
            if a.sort != b.sort or a.sort == "Elem":
                raise SortMismatch(f"ite branches have sorts {a.sort} and {b.sort}", e.pos)
            return Ty(a.sort, const)
        if isinstance(e, A.Call):
            ty = self.expect_sort(e.arg, scope, _NUMERIC, f"argument of {e.func}")
            if not ty.const:
                raise SortMismatch(f"{e.func} applies to constant expressions only", e.pos)
            return Ty("Int", True)
        raise SortMismatch(f"unsupported expression {type(e).__name__}", getattr(e, "pos", A.NOPOS))

    def binary(self, e: A.Binary, scope) -> Ty:
        op = e.op
        if op in ("and", "or", "->", "<->"):
            a = self.expect_sort(e.left, scope, ("Bool",), f"left operand of {op!r}")
            b = self.expect_sort(e.right, scope, ("Bool",), f"right operand of {op!r}")
            return Ty("Bool", a.const and b.const)
        a = self.expr(e.left, scope)
        b = self.expr(e.right, scope)
        const = a.const and b.const
        if op in ("+", "-", "*", "/"):
            for side, ty in (("left", a), ("right", b)):
                if ty.sort not in _NUMERIC:
                    raise SortMismatch(f"{side} operand of {op!r} must be numeric, got {ty.sort}", e.pos)
            if op == "/":
                if not b.const:
                    raise SortMismatch("division is only allowed by constant expressions", e.pos)
                if isinstance(e.right, (A.IntLit, A.DecLit)) and e.right.value == 0:
                    raise SortMismatch("division by zero", e.pos)
                return Ty("Real", const)
            return Ty("Real" if "Real" in (a.sort, b.sort) else "Int", const)
        if op in ("==", "!="):
            if a.sort in _NUMERIC and b.sort in _NUMERIC:
                return Ty("Bool", const)
            if a.sort != b.sort:
                raise SortMismatch(f"cannot compare {a.sort} with {b.sort}", e.pos)
            if a.sort == "Elem" and not const:
                raise SortMismatch("element comparisons must be constant", e.pos)
            return Ty("Bool", const)
        if op in ("<", "<=", ">", ">="):
            if a.sort not in _NUMERIC or b.sort not in _NUMERIC:
                raise SortMismatch(f"{op!r} compares numbers, got {a.sort} and {b.sort}", e.pos)
            return Ty("Bool", const)
        raise SortMismatch(f"unknown operator {op!r}", e.pos)


def typecheck(prog: A.Program, background: Mapping[str, Any] | Iterable | None = None) -> SortEnv:
    """Type-check ``prog``; ``background`` maps table names to JSON data.

    A sequence of ``BackgroundItem`` objects (as held by ``ProblemInput``)
    is accepted as well.
    """
    if background is None:
        tables: Mapping[str, Any] = {}
    elif isinstance(background, Mapping):
        tables = background
    else:
        tables = {b.name: b.data for b in background if getattr(b, "kind", "data") == "data"}
    return _Checker(prog, tables).check()
