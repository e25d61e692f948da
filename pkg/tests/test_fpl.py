import random
from fractions import Fraction

import pytest
from hypothesis import given, settings

from fplan.domains import DOMAIN_IDS, get_domain
from fplan.fpl import (
    FplSyntaxError,
    IndexArityMismatch,
    SortMismatch,
    UnboundIdentifier,
    parse,
    parse_expr,
    print_program,
    typecheck,
)
from fplan.fpl import ast as A

from fpl_strategies import mutations, normalize_fractions, programs

COFFEE_SNIPPET = (
    "var x[Supplier,Roastery]: Int; "
    "assert forall s in Supplier: sum(r in Roastery) x[s,r] <= cap[s];"
)


def test_parse_declaration_and_quantified_assert():
    prog = parse(COFFEE_SNIPPET)
    assert len(prog.decls) == 1 and len(prog.asserts) == 1
    assert prog.decls[0] == A.VarDecl("x", ("Supplier", "Roastery"), "Int")
    q = prog.asserts[0].expr
    assert isinstance(q, A.Quant) and q.op == "forall"
    assert isinstance(q.body.left, A.Aggregate)


@pytest.mark.parametrize("src", ["", "   \n  "])
def test_blank_input_is_a_syntax_error(src):
    with pytest.raises(FplSyntaxError) as err:
        parse(src)
    assert err.value.line >= 1 and err.value.col >= 1


def test_undeclared_objective_parses_but_fails_typecheck():
    prog = parse("minimize total_cost;")
    assert prog.objective.direction == "minimize"
    with pytest.raises(UnboundIdentifier):
        typecheck(prog, {})


def test_reserved_word_as_name():
    with pytest.raises(FplSyntaxError, match="reserved"):
        parse("var forall: Int;")


def test_syntax_error_positions():
    with pytest.raises(FplSyntaxError) as err:
        parse("var x: Int;\nassert x <= ;")
    assert (err.value.line, err.value.col) == (2, 13)
    assert err.value.format("m.fpl").startswith("m.fpl:2:13: ")


def test_comparisons_do_not_chain():
    with pytest.raises(FplSyntaxError):
        parse_expr("1 < 2 < 3")


BG = {"Supplier": ["s1", "s2"], "Roastery": ["r1", "r2"], "cap": {"s1": 3, "s2": 4}}
HEAD = "set Supplier; set Roastery; param cap[Supplier]: Int;\n"


def test_typecheck_ok():
    env = typecheck(parse(HEAD + COFFEE_SNIPPET), BG)
    assert env.sort_of("x") == ("Int", ("Supplier", "Roastery"))


def test_bool_in_sum_is_sort_mismatch():
    with pytest.raises(SortMismatch):
        typecheck(parse(HEAD + "var b[Supplier]: Bool; assert sum(s in Supplier) b[s] >= 1;"), BG)


def test_wrong_index_arity():
    src = HEAD + "var x[Supplier, Roastery]: Int; assert forall s in Supplier, r in Roastery: x[s, r] <= cap[s, r];"
    with pytest.raises(IndexArityMismatch):
        typecheck(parse(src), BG)


def test_param_table_must_cover_index():
    with pytest.raises(Exception, match="cap"):
        typecheck(parse(HEAD), {**BG, "cap": {"s1": 3}})


def test_coffee_reference_env():
    d = get_domain("coffee")
    env = typecheck(d.reference_ast, d.background)
    for name in ("x", "y_light", "y_dark"):
        sort, index = env.sort_of(name)
        assert sort == "Int" and len(index) == 2


def test_typecheck_ignores_independent_declaration_order():
    a = "set S = {1, 2}; var x[S]: Int; var y: Int; assert y == sum(s in S) x[s];"
    b = "set S = {1, 2}; var y: Int; var x[S]: Int; assert y == sum(s in S) x[s];"
    ea, eb = typecheck(parse(a)), typecheck(parse(b))
    assert {k: ea.sort_of(k) for k in ("x", "y")} == {k: eb.sort_of(k) for k in ("x", "y")}


@pytest.mark.parametrize("domain_id", DOMAIN_IDS)
def test_reference_programs_round_trip(domain_id):
    prog = get_domain(domain_id).reference_ast
    assert parse(print_program(prog)) == prog


def test_empty_program_prints_a_header_that_reparses_empty():
    text = print_program(A.Program())
    assert text.startswith("#")
    assert parse(text) == A.Program()


def test_decimal_literal_is_exact():
    e = parse_expr("1.29 * 20")
    assert e.left.value == Fraction(129, 100)


# -- generated programs ---------------------------------------------------------

@settings(max_examples=100, deadline=None)
@given(programs)
def test_print_parse_round_trip(prog):
    stmts = tuple(
        A.ParamDecl(s.name, s.index, s.sort, normalize_fractions(s.value)) if isinstance(s, A.ParamDecl) else s
        for s in prog.statements
    )
    prog = A.Program(stmts)
    assert parse(print_program(prog)) == prog


# -- fuzzing ----------------------------------------------------------------------


def test_fuzzed_inputs_never_crash_the_parser():
    rng = random.Random(2024)
    seeds = [get_domain(d).reference_source for d in DOMAIN_IDS] + [COFFEE_SNIPPET]
    parsed = failed = 0
    for src in mutations(seeds, 10_000, rng):
        try:
            prog = parse(src)
        except FplSyntaxError as exc:
            assert exc.line >= 1 and exc.col >= 1
            failed += 1
        else:
            assert isinstance(prog, A.Program)
            parsed += 1
    assert parsed + failed == 10_000
