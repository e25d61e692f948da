import random
import time

import pytest
import z3

from fplan.domains import get_domain
from fplan.fpl import parse, typecheck
from fplan.smt import (
    DecodeError,
    HorizonConfig,
    PlanSchema,
    SchemaMismatch,
    SetTooLarge,
    TMaxExceeded,
    UnknownPredicate,
    decode,
    emit_exactly_one_action,
    emit_frame_axioms,
    lower,
    solve,
    solve_bounded_horizon,
    symbol_name,
    to_smtlib,
)
from fplan.strips import GroundAction

from helpers import actions_per_step, frame_violations, random_walk, second_action_is_unsat


def lowered(src, background=None, **kw):
    prog = parse(src)
    return lower(prog, typecheck(prog, background or {}), **kw)


def test_coffee_symbol_counts():
    d = get_domain("coffee")
    env = typecheck(d.reference_ast, d.background)
    problem = lower(d.reference_ast, env)
    sizes = {f: len(m) for f, m in problem.families.items()}
    assert sizes["x"] == len(env.sets["Supplier"]) * len(env.sets["Roastery"])
    assert sizes["y_light"] + sizes["y_dark"] == 2 * len(env.sets["Roastery"]) * len(env.sets["Cafe"])
    assert sizes["total_cost"] == 1
    assert all(problem.family_sorts[f] == "Int" for f in ("x", "y_light", "y_dark", "total_cost"))


def test_coffee_fixture_shape_from_three_by_two_by_three():
    bg = {"Supplier": ["s1", "s2", "s3"], "Roastery": ["r1", "r2"], "Cafe": ["c1", "c2", "c3"]}
    src = "set Supplier; set Roastery; set Cafe; var x[Supplier, Roastery]: Int; var y_light[Roastery, Cafe]: Int; var y_dark[Roastery, Cafe]: Int; var total_cost: Int;"
    problem = lowered(src, bg)
    assert len(problem.families["x"]) == 6
    assert len(problem.families["y_light"]) + len(problem.families["y_dark"]) == 12
    assert len(problem.variables) == 19


def test_symbol_naming():
    assert symbol_name("x", ("s1", "r2")) == "x__s1__r2"
    assert symbol_name("total_cost") == "total_cost"
    problem = lowered("set S = {1, 2}; var x[S]: Int;")
    assert sorted(problem.variables) == ["x__1", "x__2"]


def test_trivial_objective():
    out = solve(lowered("minimize 0;"), timeout=5)
    assert out.status == "sat" and out.objective_value == 0


def test_forall_over_empty_set_emits_nothing():
    problem = lowered("set E = {}; var x: Int; assert forall e in E: x > 5 and x < 0;")
    assert problem.assertions == []


def test_contradiction_is_unsat():
    out = solve(lowered("var x: Int; assert x > 0 and x < 0;"), timeout=5)
    assert out.status == "unsat" and out.model is None


def test_minimize_to_bound():
    out = solve(lowered("var x: Int; assert x >= 3; minimize x;"), timeout=5)
    assert out.status == "sat" and out.model["x"] == 3 and out.objective_value == 3


def test_unroll_cap():
    with pytest.raises(SetTooLarge):
        lowered("set S = 0..2000; var x[S, S]: Int;", cap=10_000)


def test_smtlib_dump_mentions_objective():
    text = to_smtlib(lowered("var x: Int; assert x >= 3; minimize x;"))
    assert "(minimize x)" in text and "(declare-fun x () Int)" in text


def test_timeout_is_reported_not_a_model():
    # pigeonhole: 9 pigeons, 8 holes, hard for CDCL within a tiny budget
    src = (
        "set P = 1..9; set H = 1..8; var in_[P, H]: Bool;"
        "assert forall p in P: exists h in H: in_[p, h];"
        "assert forall h in H, p in P, q in P where p < q: not (in_[p, h] and in_[q, h]);"
    )
    start = time.monotonic()
    out = solve(lowered(src), timeout=0.05)
    assert time.monotonic() - start < 5
    assert out.status in ("timeout", "unsat")
    if out.status == "timeout":
        assert out.model is None


# -- multi-step ------------------------------------------------------------------


def bw_two_blocks():
    bw = get_domain("blocksworld")
    return bw, bw.case("bw-000")


def _compile(domain, case, with_goal=True):
    prog = parse(domain.program_source(case, with_goal=with_goal) if domain.kind == "multi_step" else domain.program_source(case))
    return prog, typecheck(prog, domain.problem_input(case).data_tables())


def test_two_blocks_horizon_and_decode():
    bw, case = bw_two_blocks()
    prog, env = _compile(bw, case)
    out, T = solve_bounded_horizon(prog, env, HorizonConfig(0, 10, 10, 30))
    assert (out.status, T) == ("sat", 2)
    assert decode(out, {"kind": "multi_step", "fields": [{"name": "actions", "type": "actions"}]}) == {"actions": ["pickup a", "stack a b"]}
    for t in (0, 1):
        assert solve(lower(prog, env, horizon=t), 10).status == "unsat"


def test_goal_already_true_gives_empty_plan():
    bw = get_domain("blocksworld")
    case = bw.case("bw-001")
    prog, env = _compile(bw, case)
    out, T = solve_bounded_horizon(prog, env, HorizonConfig(0, 5, 10, 30))
    assert T == 0 and decode(out, bw.schema) == {"plan": []}


def test_unreachable_goal_raises():
    bw, case = bw_two_blocks()
    src = bw.program_source(case, with_goal=False) + 'goal: on["a", "a"];\n'
    prog = parse(src)
    env = typecheck(prog, bw.problem_input(case).data_tables())
    with pytest.raises(TMaxExceeded):
        solve_bounded_horizon(prog, env, HorizonConfig(0, 10, 10, 60))


def test_pickup_effects_and_persistence():
    bw = get_domain("blocksworld")
    case = bw.case("bw-001")  # a on b on table, c on table
    table = bw.action_table(case)
    plan = [table["unstack b a"], table["putdown b"], table["pickup c"]]
    assert frame_violations(bw, case, plan) == []


def test_no_action_means_persistence():
    ctx = z3.Context()
    p = [z3.Bool(f"p{t}", ctx) for t in range(2)]
    act = [z3.Bool("a0", ctx)]
    ga = GroundAction("a", (), frozenset(), frozenset({("p",)}), frozenset())
    axioms = emit_frame_axioms({("p",): p}, [(ga, act)], 1)
    s = z3.Solver(ctx=ctx)
    s.add(axioms + [z3.Not(act[0]), p[0] != p[1]])
    assert s.check() == z3.unsat


def test_frame_axioms_reject_undeclared_fluent():
    ctx = z3.Context()
    ga = GroundAction("a", (), frozenset(), frozenset({("q",)}), frozenset())
    with pytest.raises(UnknownPredicate):
        emit_frame_axioms({("p",): [z3.Bool("p0", ctx), z3.Bool("p1", ctx)]}, [(ga, [z3.Bool("a0", ctx)])], 1)


def test_pairwise_exactly_one_shape():
    ctx = z3.Context()
    lits = [z3.Bool(n, ctx) for n in "abc"]
    out = emit_exactly_one_action([lits], "pairwise")
    assert len(out) == 4
    assert sum(1 for f in out if z3.is_or(f)) == 1
    assert sum(1 for f in out if z3.is_not(f)) == 3


def test_random_gripper_walk_matches_simulator():
    gr = get_domain("gripper")
    rng = random.Random(11)
    for case in gr.cases[:4]:
        plan = random_walk(gr, case, 6, rng)
        assert frame_violations(gr, case, plan) == []


def test_second_action_forces_unsat_both_encodings():
    bw = get_domain("blocksworld")
    rng = random.Random(5)
    case = bw.case("bw-005")
    plan = random_walk(bw, case, 4, rng)
    for method in ("pb", "pairwise"):
        assert second_action_is_unsat(bw, case, plan, rng.randrange(len(plan)), rng, method)


@pytest.mark.parametrize("method", ["pb", "pairwise"])
def test_movie_plan_one_action_per_step(method):
    mv = get_domain("movie")
    case = mv.cases[4]
    prog, env = _compile(mv, case)
    out, T = solve_bounded_horizon(prog, env, HorizonConfig(0, 30, 30, 60), exactly_one=method)
    assert out.status == "sat" and T == mv.oracle_optimal(case)
    assert actions_per_step(out.problem, out.model) == [1] * T


def test_encodings_agree_on_plan_length():
    bw = get_domain("blocksworld")
    for case in bw.cases[2:6]:
        prog, env = _compile(bw, case)
        lengths = {solve_bounded_horizon(prog, env, HorizonConfig(0, 12, 30, 60), exactly_one=m)[1] for m in ("pb", "pairwise")}
        assert len(lengths) == 1


# -- decoding -------------------------------------------------------------------


def test_decode_coffee_schema():
    d = get_domain("coffee")
    prog, env = _compile(d, d.case("co-000"))
    out = solve(lower(prog, env), 60)
    plan = decode(out, d.schema)
    assert set(plan) == {f["name"] for f in d.schema.fields}
    assert plan["total_cost"] == out.objective_value


def test_decode_unknown_variable():
    out = solve(lowered("var x: Int; assert x == 1;"), 5)
    with pytest.raises(SchemaMismatch):
        decode(out, {"fields": [{"name": "y", "type": "scalar", "variable": "y"}]})


def test_decode_needs_sat():
    out = solve(lowered("var x: Int; assert x > 0 and x < 0;"), 5)
    with pytest.raises(DecodeError):
        decode(out, PlanSchema("single_step", ()))


def test_determinism_of_status_and_objective():
    d = get_domain("facility")
    prog, env = _compile(d, d.case("fa-003"))
    runs = {(o.status, o.objective_value) for o in (solve(lower(prog, env), 60) for _ in range(3))}
    assert len(runs) == 1
