"""AST node types for FPL programs.

Every node carries a source position that is excluded from equality, so a
printed-then-reparsed program compares equal to the original.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Union

SORTS = ("Int", "Real", "Bool")


@dataclass(frozen=True)
class Pos:
    line: int = 0
    col: int = 0

    def __str__(self) -> str:
        return f"{self.line}:{self.col}"


NOPOS = Pos()


def _pos():
    return field(default=NOPOS, compare=False, repr=False)


# -- expressions -------------------------------------------------------------


@dataclass(frozen=True)
class IntLit:
    value: int
    pos: Pos = _pos()


@dataclass(frozen=True)
class DecLit:
    """Exact decimal literal such as ``1.29``; ``text`` keeps the spelling."""

    text: str
    pos: Pos = _pos()

    @property
    def value(self) -> Fraction:
        return Fraction(self.text)


@dataclass(frozen=True)
class StrLit:
    value: str
    pos: Pos = _pos()


@dataclass(frozen=True)
class BoolLit:
    value: bool
    pos: Pos = _pos()


@dataclass(frozen=True)
class Name:
    ident: str
    pos: Pos = _pos()


@dataclass(frozen=True)
class Index:
    ident: str
    args: tuple["Expr", ...]
    pos: Pos = _pos()


@dataclass(frozen=True)
class Unary:
    op: str  # "-" or "not"
    operand: "Expr"
    pos: Pos = _pos()


@dataclass(frozen=True)
class Binary:
    op: str  # + - * / == != <= >= < > and or -> <->
    left: "Expr"
    right: "Expr"
    pos: Pos = _pos()


@dataclass(frozen=True)
class Binder:
    var: str
    set_name: str
    pos: Pos = _pos()


@dataclass(frozen=True)
class Aggregate:
    op: str  # "sum" or "count"
    binders: tuple[Binder, ...]
    where: "Expr | None"
    body: "Expr"
    pos: Pos = _pos()


@dataclass(frozen=True)
class Quant:
    op: str  # "forall" or "exists"
    binders: tuple[Binder, ...]
    where: "Expr | None"
    body: "Expr"
    pos: Pos = _pos()


@dataclass(frozen=True)
class Ite:
    cond: "Expr"
    then: "Expr"
    other: "Expr"
    pos: Pos = _pos()


@dataclass(frozen=True)
class Call:
    func: str  # "ceil" or "floor"
    arg: "Expr"
    pos: Pos = _pos()


Expr = Union[IntLit, DecLit, StrLit, BoolLit, Name, Index, Unary, Binary, Aggregate, Quant, Ite, Call]


# -- statements --------------------------------------------------------------


@dataclass(frozen=True)
class SetDecl:
    """``set S = {"a", "b"};``, ``set S = 0..4;`` or ``set S;`` (from background)."""

    name: str
    elements: tuple[str | int, ...] | None = None
    range_: tuple[int, int] | None = None
    pos: Pos = _pos()


@dataclass(frozen=True)
class ParamDecl:
    name: str
    index: tuple[str, ...]
    sort: str
    value: object = None  # JSON-like literal or None to read from background
    pos: Pos = _pos()


@dataclass(frozen=True)
class VarDecl:
    name: str
    index: tuple[str, ...]
    sort: str
    pos: Pos = _pos()


@dataclass(frozen=True)
class HorizonDecl:
    """Marks a multi-step program; ``name`` is the horizon bound (e.g. ``T``)."""

    name: str
    pos: Pos = _pos()


@dataclass(frozen=True)
class FluentDecl:
    name: str
    index: tuple[str, ...]
    pos: Pos = _pos()


@dataclass(frozen=True)
class Atom:
    fluent: str
    args: tuple[Expr, ...]
    pos: Pos = _pos()


@dataclass(frozen=True)
class ActionDecl:
    name: str
    params: tuple[Binder, ...]
    where: Expr | None
    pre: tuple[Atom, ...]
    add: tuple[Atom, ...]
    delete: tuple[Atom, ...]
    pos: Pos = _pos()


@dataclass(frozen=True)
class InitDecl:
    atoms: tuple[Atom, ...]
    pos: Pos = _pos()


@dataclass(frozen=True)
class GoalDecl:
    atoms: tuple[Atom, ...]
    pos: Pos = _pos()


@dataclass(frozen=True)
class Assert:
    expr: Expr
    pos: Pos = _pos()


@dataclass(frozen=True)
class Objective:
    direction: str  # "minimize" or "maximize"
    expr: Expr
    pos: Pos = _pos()


Statement = Union[SetDecl, ParamDecl, VarDecl, HorizonDecl, FluentDecl, ActionDecl, InitDecl, GoalDecl, Assert, Objective]


@dataclass(frozen=True)
class Program:
    statements: tuple[Statement, ...] = ()

    def _of(self, kind):
        return [s for s in self.statements if isinstance(s, kind)]

    @property
    def sets(self) -> list[SetDecl]:
        return self._of(SetDecl)

    @property
    def params(self) -> list[ParamDecl]:
        return self._of(ParamDecl)

    @property
    def decls(self) -> list[VarDecl]:
        return self._of(VarDecl)

    @property
    def fluents(self) -> list[FluentDecl]:
        return self._of(FluentDecl)

    @property
    def actions(self) -> list[ActionDecl]:
        return self._of(ActionDecl)

    @property
    def asserts(self) -> list[Assert]:
        return self._of(Assert)

    @property
    def objectives(self) -> list[Objective]:
        return self._of(Objective)

    @property
    def objective(self) -> Objective | None:
        objs = self.objectives
        return objs[0] if objs else None

    @property
    def horizon(self) -> HorizonDecl | None:
        marks = self._of(HorizonDecl)
        return marks[0] if marks else None

    @property
    def inits(self) -> list[InitDecl]:
        return self._of(InitDecl)

    @property
    def goals(self) -> list[GoalDecl]:
        return self._of(GoalDecl)
