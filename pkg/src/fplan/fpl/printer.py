"""Canonical pretty-printer; ``parse(print_program(p)) == p`` for any AST."""

from __future__ import annotations

from fractions import Fraction

from . import ast as A

EMPTY_HEADER = "# empty FPL program\n"

# Binding strength, loosest first.
_PREC = {
    "quant": 0,
    "->": 1,
    "<->": 1,
    "or": 2,
    "and": 3,
    "not": 4,
    "cmp": 5,
    "+": 6,
    "-": 6,
    "*": 7,
    "/": 7,
    "neg": 8,
    "atom": 9,
}
_CMP = ("==", "!=", "<=", ">=", "<", ">")


def _prec(e: A.Expr) -> int:
    if isinstance(e, A.Quant):
        return _PREC["quant"]
    if isinstance(e, A.Binary):
        return _PREC["cmp"] if e.op in _CMP else _PREC[e.op]
    if isinstance(e, A.Unary):
        return _PREC["not"] if e.op == "not" else _PREC["neg"]
    return _PREC["atom"]


def _quote(s: str) -> str:
    return '"' + s.replace("\\", "\\\\").replace('"', '\\"') + '"'


def fraction_text(value: Fraction) -> str:
    """Exact decimal spelling of a terminating fraction."""
    if value.denominator == 1:
        return f"{value.numerator}.0"
    sign = "-" if value < 0 else ""
    value = abs(value)
    den = value.denominator
    twos = fives = 0
    while den % 2 == 0:
        den //= 2
        twos += 1
    while den % 5 == 0:
        den //= 5
        fives += 1
    if den != 1:
        raise ValueError(f"{value} has no finite decimal expansion")
    digits = max(twos, fives)
    scaled = value * 10**digits
    whole, frac = divmod(int(scaled), 10**digits)
    return f"{sign}{whole}.{frac:0{digits}d}"


def _ends_in_aggregate(e: A.Expr) -> bool:
    # an aggregate body swallows a trailing product, so such operands need parens
    if isinstance(e, A.Aggregate):
        return True
    if isinstance(e, A.Binary) and e.op in ("*", "/"):
        return _ends_in_aggregate(e.right)
    if isinstance(e, A.Unary) and e.op == "-":
        return _ends_in_aggregate(e.operand)
    return False


def expr_text(e: A.Expr, need: int = 0) -> str:
    text = _expr(e)
    return f"({text})" if _prec(e) < need else text


def _binders(bs: tuple[A.Binder, ...]) -> str:
    return ", ".join(f"{b.var} in {b.set_name}" for b in bs)


def _expr(e: A.Expr) -> str:
    if isinstance(e, A.IntLit):
        return str(e.value)
    if isinstance(e, A.DecLit):
        return e.text
    if isinstance(e, A.StrLit):
        return _quote(e.value)
    if isinstance(e, A.BoolLit):
        return "true" if e.value else "false"
    if isinstance(e, A.Name):
        return e.ident
    if isinstance(e, A.Index):
        return f"{e.ident}[{', '.join(expr_text(a) for a in e.args)}]"
    if isinstance(e, A.Unary):
        if e.op == "not":
            return f"not {expr_text(e.operand, _PREC['not'])}"
        inner = expr_text(e.operand, _PREC["neg"])
        # keep "- -x" from reading as a single token
        return f"-{inner}" if not inner.startswith("-") else f"-({inner})"
    if isinstance(e, A.Binary):
        p = _prec(e)
        if e.op in ("->", "<->"):
            # right-associative: the left operand must bind tighter
            return f"{expr_text(e.left, p + 1)} {e.op} {expr_text(e.right, p)}"
        if e.op in _CMP:
            return f"{expr_text(e.left, p + 1)} {e.op} {expr_text(e.right, p + 1)}"
        left = expr_text(e.left, p)
        if e.op in ("*", "/") and _ends_in_aggregate(e.left):
            left = f"({left})"
        return f"{left} {e.op} {expr_text(e.right, p + 1)}"
    if isinstance(e, A.Aggregate):
        where = f" where {expr_text(e.where, 1)}" if e.where is not None else ""
        return f"{e.op}({_binders(e.binders)}{where}) {expr_text(e.body, _PREC['*'])}"
    if isinstance(e, A.Quant):
        where = f" where {expr_text(e.where, 1)}" if e.where is not None else ""
        return f"{e.op} {_binders(e.binders)}{where}: {expr_text(e.body)}"
    if isinstance(e, A.Ite):
        return f"ite({expr_text(e.cond)}, {expr_text(e.then)}, {expr_text(e.other)})"
    if isinstance(e, A.Call):
        return f"{e.func}({expr_text(e.arg)})"
    raise TypeError(f"not an FPL expression: {e!r}")


def literal_text(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, int):
        return str(value)
    if isinstance(value, Fraction):
        return fraction_text(value)
    if isinstance(value, float):
        return fraction_text(Fraction(repr(value)))
    if isinstance(value, str):
        return _quote(value)
    if isinstance(value, dict):
        return "{" + ", ".join(f"{_quote(str(k))}: {literal_text(v)}" for k, v in value.items()) + "}"
    if isinstance(value, (list, tuple)):
        return "[" + ", ".join(literal_text(v) for v in value) + "]"
    raise TypeError(f"cannot print literal {value!r}")


def _atoms(atoms: tuple[A.Atom, ...]) -> str:
    parts = []
    for a in atoms:
        parts.append(f"{a.fluent}[{', '.join(expr_text(x) for x in a.args)}]" if a.args else a.fluent)
    return ", ".join(parts)


def _index(idx: tuple[str, ...]) -> str:
    return f"[{', '.join(idx)}]" if idx else ""


def statement_text(s: A.Statement) -> str:
    if isinstance(s, A.SetDecl):
        if s.elements is not None:
            return f"set {s.name} = {{{', '.join(_quote(x) if isinstance(x, str) else str(x) for x in s.elements)}}};"
        if s.range_ is not None:
            return f"set {s.name} = {s.range_[0]}..{s.range_[1]};"
        return f"set {s.name};"
    if isinstance(s, A.ParamDecl):
        value = f" = {literal_text(s.value)}" if s.value is not None else ""
        return f"param {s.name}{_index(s.index)}: {s.sort}{value};"
    if isinstance(s, A.VarDecl):
        return f"var {s.name}{_index(s.index)}: {s.sort};"
    if isinstance(s, A.HorizonDecl):
        return f"horizon {s.name};"
    if isinstance(s, A.FluentDecl):
        return f"fluent {s.name}{_index(s.index)};"
    if isinstance(s, A.ActionDecl):
        head = f"action {s.name}"
        if s.params:
            head += f"({_binders(s.params)})"
        if s.where is not None:
            head += f" where {expr_text(s.where, 1)}"
        lines = [head + " {"]
        for key, atoms in (("pre", s.pre), ("add", s.add), ("del", s.delete)):
            if atoms:
                lines.append(f"  {key}: {_atoms(atoms)};")
        lines.append("}")
        return "\n".join(lines)
    if isinstance(s, A.InitDecl):
        return f"init: {_atoms(s.atoms)};"
    if isinstance(s, A.GoalDecl):
        return f"goal: {_atoms(s.atoms)};"
    if isinstance(s, A.Assert):
        return f"assert {expr_text(s.expr)};"
    if isinstance(s, A.Objective):
        return f"{s.direction} {expr_text(s.expr)};"
    raise TypeError(f"not an FPL statement: {s!r}")


def print_program(prog: A.Program) -> str:
    if not prog.statements:
        return EMPTY_HEADER
    return "\n".join(statement_text(s) for s in prog.statements) + "\n"
