"""Hypothesis strategies for FPL programs and a source mutator for fuzzing."""

import string
from fractions import Fraction

from hypothesis import strategies as st

from fplan.fpl import ast as A
from fplan.fpl.parser import KEYWORDS as RESERVED

ident = st.from_regex(r"[a-z_][a-z0-9_]{0,6}", fullmatch=True).filter(lambda s: s not in RESERVED)
set_name = st.from_regex(r"[A-Z][a-z]{0,5}", fullmatch=True).filter(lambda s: s not in RESERVED)
int_lit = st.integers(0, 10**6).map(A.IntLit)
dec_lit = st.tuples(st.integers(0, 999), st.integers(0, 999)).map(lambda p: A.DecLit(f"{p[0]}.{p[1]}"))
str_lit = st.text(string.ascii_letters + string.digits + ' _-"\\', max_size=6).map(A.StrLit)
binders = st.lists(st.builds(A.Binder, ident, set_name), min_size=1, max_size=2).map(tuple)

leaf = st.one_of(
    int_lit,
    dec_lit,
    str_lit,
    st.booleans().map(A.BoolLit),
    ident.map(A.Name),
)


def _compound(sub):
    args = st.lists(sub, min_size=1, max_size=3).map(tuple)
    return st.one_of(
        st.builds(A.Index, ident, args),
        st.builds(A.Unary, st.sampled_from(["-", "not"]), sub),
        st.builds(A.Binary, st.sampled_from(["+", "-", "*", "/", "==", "!=", "<=", ">=", "<", ">", "and", "or", "->", "<->"]), sub, sub),
        st.builds(A.Aggregate, st.sampled_from(["sum", "count"]), binders, st.none() | sub, sub),
        st.builds(A.Quant, st.sampled_from(["forall", "exists"]), binders, st.none() | sub, sub),
        st.builds(A.Ite, sub, sub, sub),
        st.builds(A.Call, st.sampled_from(["ceil", "floor"]), sub),
    )


exprs = st.recursive(leaf, _compound, max_leaves=12)
sorts = st.sampled_from(A.SORTS)
index_sig = st.lists(set_name, max_size=3).map(tuple)
json_leaf = st.one_of(
    st.integers(-1000, 1000),
    st.booleans(),
    st.text(string.ascii_letters, max_size=4),
    st.fractions(max_denominator=1).map(lambda f: f) | st.sampled_from([Fraction(3, 2), Fraction(-1, 4)]),
)
json_value = st.recursive(
    json_leaf,
    lambda sub: st.lists(sub, max_size=3) | st.dictionaries(st.text(string.ascii_letters + string.digits, min_size=1, max_size=4), sub, max_size=3),
    max_leaves=8,
)
atoms = st.lists(st.builds(A.Atom, ident, st.lists(exprs, max_size=2).map(tuple)), max_size=3).map(tuple)

statements = st.one_of(
    st.builds(A.SetDecl, set_name, st.none() | st.lists(st.integers(-5, 5) | ident, max_size=4).map(tuple)),
    st.builds(lambda n, lo, w: A.SetDecl(n, None, (lo, lo + w)), set_name, st.integers(-5, 5), st.integers(0, 5)),
    st.builds(A.ParamDecl, ident, index_sig, sorts, st.none() | json_value),
    st.builds(A.VarDecl, ident, index_sig, sorts),
    st.builds(A.HorizonDecl, set_name),
    st.builds(A.FluentDecl, ident, index_sig),
    st.builds(A.ActionDecl, ident, st.lists(st.builds(A.Binder, ident, set_name), max_size=2).map(tuple), st.none() | exprs, atoms, atoms, atoms),
    st.builds(A.InitDecl, atoms),
    st.builds(A.GoalDecl, atoms),
    st.builds(A.Assert, exprs),
    st.builds(A.Objective, st.sampled_from(["minimize", "maximize"]), exprs),
)
programs = st.lists(statements, max_size=8).map(lambda ss: A.Program(tuple(ss)))


def normalize_fractions(value):
    # integral fractions print as integers and come back as int
    if isinstance(value, Fraction) and value.denominator == 1:
        return int(value)
    if isinstance(value, list):
        return [normalize_fractions(v) for v in value]
    if isinstance(value, dict):
        return {k: normalize_fractions(v) for k, v in value.items()}
    return value



def mutations(seeds, n, rng):
    alphabet = string.printable + "→∀é\x00"
    tokens = ["forall", "sum", "(", ")", "[", "]", "{", "}", ";", ":", "..", "->", '"', "#", "1.5", "-", "where", "in"]
    for _ in range(n):
        src = list(rng.choice(seeds))
        for _ in range(rng.randint(1, 4)):
            op = rng.randrange(4)
            i = rng.randrange(len(src) + 1)
            if op == 0 and src:
                del src[min(i, len(src) - 1)]
            elif op == 1:
                src.insert(i, rng.choice(alphabet))
            elif op == 2:
                src[i:i] = rng.choice(tokens)
            elif src:
                j = rng.randrange(len(src))
                src[i:i], src[j:j + 1] = src[j:j + 1], []
        yield "".join(src)
