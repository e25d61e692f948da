"""Recursive-descent parser for FPL (grammar in ``docs/fpl.ebnf``)."""

from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction

from . import ast as A

KEYWORDS = frozenset(
    """
    set param var horizon fluent action where pre add del init goal assert
    minimize maximize forall exists in sum count ite ceil floor and or not
    true false Int Real Bool
    """.split()
)

MAX_DEPTH = 200


class FplSyntaxError(Exception):
    """Positioned syntax error; ``str()`` reads ``line:col: message``."""

    def __init__(self, message: str, line: int, col: int):
        super().__init__(f"{line}:{col}: {message}")
        self.message = message
        self.line = line
        self.col = col

    def format(self, filename: str = "<fpl>") -> str:
        return f"{filename}:{self.line}:{self.col}: {self.message}"


@dataclass(frozen=True)
class Token:
    kind: str  # IDENT KW INT DEC STR OP EOF
    text: str
    line: int
    col: int

    @property
    def pos(self) -> A.Pos:
        return A.Pos(self.line, self.col)


_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r\f\v]+)
  | (?P<nl>\n)
  | (?P<comment>\#[^\n]*)
  | (?P<dec>\d+\.\d+)
  | (?P<range>\.\.)
  | (?P<int>\d+)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<str>"(?:[^"\\\n]|\\.)*")
  | (?P<op><->|->|==|!=|<=|>=|[<>+\-*/;,:\[\](){}=])
    """,
    re.VERBOSE,
)


def tokenize(src: str) -> list[Token]:
    tokens: list[Token] = []
    line, line_start, i = 1, 0, 0
    n = len(src)
    while i < n:
        m = _TOKEN_RE.match(src, i)
        col = i - line_start + 1
        if not m:
            ch = src[i]
            if ch == '"':
                raise FplSyntaxError("unterminated string literal", line, col)
            raise FplSyntaxError(f"unexpected character {ch!r}", line, col)
        kind = m.lastgroup
        text = m.group(0)
        if kind == "nl":
            line += 1
            line_start = m.end()
        elif kind in ("ws", "comment"):
            pass
        elif kind == "ident":
            tokens.append(Token("KW" if text in KEYWORDS else "IDENT", text, line, col))
        elif kind == "int":
            tokens.append(Token("INT", text, line, col))
        elif kind == "dec":
            tokens.append(Token("DEC", text, line, col))
        elif kind == "str":
            tokens.append(Token("STR", text, line, col))
        else:
            tokens.append(Token("OP", text, line, col))
        i = m.end()
    tokens.append(Token("EOF", "", line, i - line_start + 1))
    return tokens


def _unquote(text: str) -> str:
    body = text[1:-1]
    return re.sub(r"\\(.)", lambda m: m.group(1), body)


class Parser:
    def __init__(self, src: str):
        self.tokens = tokenize(src)
        self.i = 0
        self.depth = 0

    # -- token helpers -------------------------------------------------------

    @property
    def tok(self) -> Token:
        return self.tokens[self.i]

    def peek(self, k: int = 1) -> Token:
        return self.tokens[min(self.i + k, len(self.tokens) - 1)]

    def error(self, message: str, tok: Token | None = None) -> FplSyntaxError:
        tok = tok or self.tok
        return FplSyntaxError(message, tok.line, tok.col)

    def at(self, text: str) -> bool:
        return self.tok.kind in ("OP", "KW") and self.tok.text == text

    def accept(self, text: str) -> Token | None:
        if self.at(text):
            tok = self.tok
            self.i += 1
            return tok
        return None

    def expect(self, text: str) -> Token:
        tok = self.accept(text)
        if tok is None:
            found = self.tok.text or "end of input"
            raise self.error(f"expected {text!r}, found {found!r}")
        return tok

    def ident(self, what: str = "identifier") -> Token:
        tok = self.tok
        if tok.kind == "IDENT":
            self.i += 1
            return tok
        if tok.kind == "KW":
            raise self.error(f"reserved word {tok.text!r} cannot be used as {what}")
        raise self.error(f"expected {what}, found {tok.text or 'end of input'!r}")

    def nest(self):
        self.depth += 1
        if self.depth > MAX_DEPTH:
            raise self.error("expression nested too deeply")

    def unnest(self):
        self.depth -= 1

    # -- program ---------------------------------------------------------------

    def program(self) -> A.Program:
        stmts = []
        while self.tok.kind != "EOF":
            stmts.append(self.statement())
        return A.Program(tuple(stmts))

    def statement(self) -> A.Statement:
        tok = self.tok
        if tok.kind != "KW":
            raise self.error(f"expected a statement keyword, found {tok.text!r}")
        handler = {
            "set": self.set_decl,
            "param": self.param_decl,
            "var": self.var_decl,
            "horizon": self.horizon_decl,
            "fluent": self.fluent_decl,
            "action": self.action_decl,
            "init": self.init_decl,
            "goal": self.goal_decl,
            "assert": self.assert_stmt,
            "minimize": self.objective,
            "maximize": self.objective,
        }.get(tok.text)
        if handler is None:
            raise self.error(f"reserved word {tok.text!r} cannot start a statement")
        return handler()

    def set_decl(self) -> A.SetDecl:
        start = self.expect("set")
        name = self.ident("set name").text
        if self.accept(";"):
            return A.SetDecl(name, pos=start.pos)
        self.expect("=")
        if self.accept("{"):
            elems: list[str | int] = []
            if not self.at("}"):
                elems.append(self.set_element())
                while self.accept(","):
                    elems.append(self.set_element())
            self.expect("}")
            self.expect(";")
            return A.SetDecl(name, elements=tuple(elems), pos=start.pos)
        lo = self.signed_int()
        self.expect_range()
        hi = self.signed_int()
        self.expect(";")
        return A.SetDecl(name, range_=(lo, hi), pos=start.pos)

    def expect_range(self):
        self.expect("..")

    def set_element(self) -> str | int:
        tok = self.tok
        if tok.kind == "STR":
            self.i += 1
            return _unquote(tok.text)
        if tok.kind == "INT" or (tok.kind == "OP" and tok.text == "-"):
            return self.signed_int()
        raise self.error(f"expected a string or integer set element, found {tok.text or 'end of input'!r}")

    def signed_int(self) -> int:
        neg = bool(self.accept("-"))
        tok = self.tok
        if tok.kind != "INT":
            raise self.error(f"expected an integer, found {tok.text or 'end of input'!r}")
        self.i += 1
        return -int(tok.text) if neg else int(tok.text)

    def index_sig(self) -> tuple[str, ...]:
        if not self.accept("["):
            return ()
        names = [self.ident("index set name").text]
        while self.accept(","):
            names.append(self.ident("index set name").text)
        self.expect("]")
        return tuple(names)

    def sort(self) -> str:
        tok = self.tok
        if tok.kind == "KW" and tok.text in A.SORTS:
            self.i += 1
            return tok.text
        raise self.error(f"expected a sort (Int, Real, Bool), found {tok.text or 'end of input'!r}")

    def param_decl(self) -> A.ParamDecl:
        start = self.expect("param")
        name = self.ident("parameter name").text
        index = self.index_sig()
        self.expect(":")
        sort = self.sort()
        value = None
        if self.accept("="):
            value = self.literal_value()
        self.expect(";")
        return A.ParamDecl(name, index, sort, value, pos=start.pos)

    def literal_value(self):
        self.nest()
        try:
            tok = self.tok
            if self.accept("{"):
                out = {}
                if not self.at("}"):
                    while True:
                        ktok = self.tok
                        if ktok.kind == "STR":
                            key = _unquote(ktok.text)
                        elif ktok.kind == "INT":
                            key = ktok.text
                        else:
                            raise self.error("expected a string key in table literal")
                        self.i += 1
                        self.expect(":")
                        out[key] = self.literal_value()
                        if not self.accept(","):
                            break
                self.expect("}")
                return out
            if self.accept("["):
                items = []
                if not self.at("]"):
                    items.append(self.literal_value())
                    while self.accept(","):
                        items.append(self.literal_value())
                self.expect("]")
                return items
            if tok.kind == "KW" and tok.text in ("true", "false"):
                self.i += 1
                return tok.text == "true"
            if tok.kind == "STR":
                self.i += 1
                return _unquote(tok.text)
            neg = bool(self.accept("-"))
            tok = self.tok
            if tok.kind == "INT":
                self.i += 1
                return -int(tok.text) if neg else int(tok.text)
            if tok.kind == "DEC":
                self.i += 1
                val = Fraction(tok.text)
                return -val if neg else val
            raise self.error(f"expected a literal value, found {tok.text or 'end of input'!r}")
        finally:
            self.unnest()

    def var_decl(self) -> A.VarDecl:
        start = self.expect("var")
        name = self.ident("variable name").text
        index = self.index_sig()
        self.expect(":")
        sort = self.sort()
        self.expect(";")
        return A.VarDecl(name, index, sort, pos=start.pos)

    def horizon_decl(self) -> A.HorizonDecl:
        start = self.expect("horizon")
        name = self.ident("horizon name").text
        self.expect(";")
        return A.HorizonDecl(name, pos=start.pos)

    def fluent_decl(self) -> A.FluentDecl:
        start = self.expect("fluent")
        name = self.ident("fluent name").text
        index = self.index_sig()
        self.expect(";")
        return A.FluentDecl(name, index, pos=start.pos)

    def binders(self) -> tuple[A.Binder, ...]:
        out = [self.binder()]
        while self.at(",") and self.peek().kind == "IDENT" and self.peek(2).text == "in":
            self.expect(",")
            out.append(self.binder())
        return tuple(out)

    def binder(self) -> A.Binder:
        var = self.ident("bound variable")
        self.expect("in")
        set_name = self.ident("set name").text
        return A.Binder(var.text, set_name, pos=var.pos)

    def atom(self) -> A.Atom:
        tok = self.ident("fluent name")
        args: tuple[A.Expr, ...] = ()
        if self.accept("["):
            args = self.expr_list("]")
        return A.Atom(tok.text, args, pos=tok.pos)

    def atom_list(self) -> tuple[A.Atom, ...]:
        atoms = []
        if self.at(";"):
            return ()
        atoms.append(self.atom())
        while self.accept(","):
            atoms.append(self.atom())
        return tuple(atoms)

    def action_decl(self) -> A.ActionDecl:
        start = self.expect("action")
        name = self.ident("action name").text
        params: tuple[A.Binder, ...] = ()
        if self.accept("("):
            if not self.at(")"):
                params = self.binders()
            self.expect(")")
        where = None
        if self.accept("where"):
            where = self.expr()
        self.expect("{")
        clauses: dict[str, list[A.Atom]] = {"pre": [], "add": [], "del": []}
        while not self.accept("}"):
            tok = self.tok
            if tok.kind == "KW" and tok.text in clauses:
                self.i += 1
                self.expect(":")
                clauses[tok.text].extend(self.atom_list())
                self.expect(";")
            else:
                raise self.error(f"expected 'pre', 'add', 'del' or '}}', found {tok.text or 'end of input'!r}")
        return A.ActionDecl(
            name, params, where, tuple(clauses["pre"]), tuple(clauses["add"]), tuple(clauses["del"]), pos=start.pos
        )

    def init_decl(self) -> A.InitDecl:
        start = self.expect("init")
        self.expect(":")
        atoms = self.atom_list()
        self.expect(";")
        return A.InitDecl(atoms, pos=start.pos)

    def goal_decl(self) -> A.GoalDecl:
        start = self.expect("goal")
        self.expect(":")
        atoms = self.atom_list()
        self.expect(";")
        return A.GoalDecl(atoms, pos=start.pos)

    def assert_stmt(self) -> A.Assert:
        start = self.expect("assert")
        expr = self.expr()
        self.expect(";")
        return A.Assert(expr, pos=start.pos)

    def objective(self) -> A.Objective:
        tok = self.tok
        self.i += 1
        expr = self.expr()
        self.expect(";")
        return A.Objective(tok.text, expr, pos=tok.pos)

    # -- expressions -----------------------------------------------------------

    def expr(self) -> A.Expr:
        self.nest()
        try:
            if self.at("forall") or self.at("exists"):
                tok = self.tok
                self.i += 1
                binders = self.binders()
                where = self.expr() if self.accept("where") else None
                self.expect(":")
                body = self.expr()
                return A.Quant(tok.text, binders, where, body, pos=tok.pos)
            return self.implication()
        finally:
            self.unnest()

    def implication(self) -> A.Expr:
        left = self.disjunction()
        tok = self.tok
        if self.accept("->") or self.accept("<->"):
            right = self.expr()
            return A.Binary(tok.text, left, right, pos=tok.pos)
        return left

    def disjunction(self) -> A.Expr:
        left = self.conjunction()
        while self.at("or"):
            tok = self.tok
            self.i += 1
            left = A.Binary("or", left, self.conjunction(), pos=tok.pos)
        return left

    def conjunction(self) -> A.Expr:
        left = self.negation()
        while self.at("and"):
            tok = self.tok
            self.i += 1
            left = A.Binary("and", left, self.negation(), pos=tok.pos)
        return left

    def negation(self) -> A.Expr:
        if self.at("not"):
            tok = self.tok
            self.i += 1
            self.nest()
            try:
                return A.Unary("not", self.negation(), pos=tok.pos)
            finally:
                self.unnest()
        return self.comparison()

    def comparison(self) -> A.Expr:
        left = self.additive()
        tok = self.tok
        if tok.kind == "OP" and tok.text in ("==", "!=", "<=", ">=", "<", ">"):
            self.i += 1
            right = self.additive()
            nxt = self.tok
            if nxt.kind == "OP" and nxt.text in ("==", "!=", "<=", ">=", "<", ">"):
                raise self.error("comparisons do not chain; add parentheses")
            return A.Binary(tok.text, left, right, pos=tok.pos)
        return left

    def additive(self) -> A.Expr:
        left = self.multiplicative()
        while self.tok.kind == "OP" and self.tok.text in ("+", "-"):
            tok = self.tok
            self.i += 1
            left = A.Binary(tok.text, left, self.multiplicative(), pos=tok.pos)
        return left

    def multiplicative(self) -> A.Expr:
        left = self.unary()
        while self.tok.kind == "OP" and self.tok.text in ("*", "/"):
            tok = self.tok
            self.i += 1
            left = A.Binary(tok.text, left, self.unary(), pos=tok.pos)
        return left

    def unary(self) -> A.Expr:
        if self.at("-"):
            tok = self.tok
            self.i += 1
            self.nest()
            try:
                return A.Unary("-", self.unary(), pos=tok.pos)
            finally:
                self.unnest()
        return self.primary()

    def expr_list(self, close: str) -> tuple[A.Expr, ...]:
        items = [self.expr()]
        while self.accept(","):
            items.append(self.expr())
        self.expect(close)
        return tuple(items)

    def primary(self) -> A.Expr:
        tok = self.tok
        if tok.kind == "INT":
            self.i += 1
            return A.IntLit(int(tok.text), pos=tok.pos)
        if tok.kind == "DEC":
            self.i += 1
            return A.DecLit(tok.text, pos=tok.pos)
        if tok.kind == "STR":
            self.i += 1
            return A.StrLit(_unquote(tok.text), pos=tok.pos)
        if tok.kind == "IDENT":
            self.i += 1
            if self.accept("["):
                return A.Index(tok.text, self.expr_list("]"), pos=tok.pos)
            return A.Name(tok.text, pos=tok.pos)
        if tok.kind == "KW":
            if tok.text in ("true", "false"):
                self.i += 1
                return A.BoolLit(tok.text == "true", pos=tok.pos)
            if tok.text in ("sum", "count"):
                self.i += 1
                self.expect("(")
                binders = self.binders()
                where = self.expr() if self.accept("where") else None
                self.expect(")")
                self.nest()
                try:
                    body = self.multiplicative()
                finally:
                    self.unnest()
                return A.Aggregate(tok.text, binders, where, body, pos=tok.pos)
            if tok.text == "ite":
                self.i += 1
                self.expect("(")
                cond = self.expr()
                self.expect(",")
                then = self.expr()
                self.expect(",")
                other = self.expr()
                self.expect(")")
                return A.Ite(cond, then, other, pos=tok.pos)
            if tok.text in ("ceil", "floor"):
                self.i += 1
                self.expect("(")
                arg = self.expr()
                self.expect(")")
                return A.Call(tok.text, arg, pos=tok.pos)
            raise self.error(f"reserved word {tok.text!r} cannot be used in an expression here")
        if self.accept("("):
            inner = self.expr()
            self.expect(")")
            return inner
        raise self.error(f"expected an expression, found {tok.text or 'end of input'!r}")


def parse(src: str) -> A.Program:
    """Parse FPL source text.

    Raises ``FplSyntaxError`` (with line and column) on any malformed input.
    Blank input is an error; a comment-only source is the empty program,
    which is what ``print_program`` emits for it.
    """
    if not isinstance(src, str):
        raise TypeError("FPL source must be text")
    if not src.strip():
        raise FplSyntaxError("empty program", 1, 1)
    parser = Parser(src)
    try:
        return parser.program()
    except RecursionError:
        tok = parser.tok
        raise FplSyntaxError("expression nested too deeply", tok.line, tok.col) from None


def parse_expr(src: str) -> A.Expr:
    parser = Parser(src)
    expr = parser.expr()
    if parser.tok.kind != "EOF":
        raise parser.error(f"unexpected {parser.tok.text!r} after expression")
    return expr
