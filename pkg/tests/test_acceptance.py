"""Acceptance suite: one PASS/FAIL line per headline criterion.

Run alone with ``pytest tests/test_acceptance.py -v`` or
``python tests/test_acceptance.py``.
"""

import json
import os
import random
import sys
import time

import pytest
from hypothesis import given, settings

from fplan.domains import INFEASIBLE, get_domain
from fplan.domains.blocksworld import obfuscate
from fplan.domains.facility import open_patterns
from fplan.fpl import FplSyntaxError, parse, print_program, typecheck
from fplan.fpl import ast as A
from fplan.llm.chat import Cassette, ChatClient
from fplan.llm.reference import ReferenceResponder, ScriptedResponder
from fplan.pipeline import Pipeline, PipelineConfig, solve_query
from fplan.smt import DEFAULT_TIMEOUT, lower, solve
from fplan.smt.decode import json_number

from fpl_strategies import mutations, normalize_fractions, programs
from helpers import MULTI_STEP, actions_per_step, frame_violations, random_walk, second_action_is_unsat

SINGLE_STEP = ("coffee", "workforce", "facility", "task_allocation", "warehouse")
MULTI_STEP_BUDGET = 300.0


def report(capsys, name, ok, detail=""):
    with capsys.disabled():
        print(f"\n{'PASS' if ok else 'FAIL'}  {name}  {detail}", flush=True)
    assert ok, detail


@pytest.fixture(scope="module")
def multi_runs():
    """Reference bounded-horizon runs over every multi-step case, timed."""
    start = time.monotonic()
    runs = {}
    for domain_id in MULTI_STEP:
        d = get_domain(domain_id)
        for case in d.cases:
            runs[(domain_id, case.id)] = d.reference_run(case, timeout=120.0, t_max=30)
    return runs, time.monotonic() - start


def test_multi_step_oracle_equivalence(capsys, multi_runs):
    runs, elapsed = multi_runs
    bw, gr, mv, mbw = (get_domain(d) for d in ("blocksworld", "gripper", "movie", "mystery_blocksworld"))
    problems = []
    if len(bw.cases) < 20 or any(len(bw.objects(c)["Block"]) > 5 for c in bw.cases):
        problems.append("blocksworld set too small or too large")
    if len(gr.cases) < 10 or any(len(gr.objects(c)["Room"]) > 2 or len(gr.objects(c)["Ball"]) > 4 for c in gr.cases):
        problems.append("gripper set too small or too large")
    if len(mv.cases) != 21:
        problems.append(f"movie has {len(mv.cases)} cases")
    images = {json.dumps(obfuscate(c).delta, sort_keys=True) for c in bw.cases}
    if images != {json.dumps(c.delta, sort_keys=True) for c in mbw.cases}:
        problems.append("mystery cases are not the images of the blocksworld set")
    checked = 0
    for (domain_id, cid), run in runs.items():
        d = get_domain(domain_id)
        case = d.case(cid)
        oracle = d.oracle_optimal(case, use_cache=False)
        if run.status != "plan" or run.horizon != oracle:
            problems.append(f"{cid}: horizon {run.horizon} vs BFS {oracle}")
            continue
        verdict = d.validate_plan(case, run.plan)
        if not (verdict.valid and verdict.optimal):
            problems.append(f"{cid}: replay failed {verdict.diagnostics}")
        checked += 1
    if elapsed >= MULTI_STEP_BUDGET:
        problems.append(f"took {elapsed:.0f}s")
    detail = f"{checked}/{len(runs)} cases match BFS length and replay, {elapsed:.1f}s"
    report(capsys, "multi-step oracle equivalence", not problems, detail + ("; " + "; ".join(problems[:5]) if problems else ""))


def test_single_step_oracle_equivalence(capsys):
    problems = []
    counts = {}
    for domain_id in SINGLE_STEP:
        d = get_domain(domain_id)
        counts[domain_id] = len(d.cases)
        if len(d.cases) < 10:
            problems.append(f"{domain_id} has only {len(d.cases)} variants")
        for case in d.cases:
            oracle = d.oracle_optimal(case, use_cache=False)
            run = d.reference_run(case, timeout=120.0)
            if oracle == INFEASIBLE:
                if run.status != "unsat":
                    problems.append(f"{case.id}: oracle infeasible, program {run.status}")
                continue
            value = json_number(run.value)
            if run.status != "plan" or not isinstance(value, int) or value != oracle:
                problems.append(f"{case.id}: program {run.status} {value!r} vs oracle {oracle!r}")
                continue
            verdict = d.validate_plan(case, run.plan)
            if not (verdict.valid and verdict.optimal):
                problems.append(f"{case.id}: decoded plan fails validation {verdict.diagnostics}")
    fac = get_domain("facility")
    subsets = list(open_patterns(fac.tables(fac.cases[0])["Plant"]))
    if len(subsets) != 32 or len(set(subsets)) != 32:
        problems.append(f"facility oracle enumerates {len(set(subsets))} subsets")
    detail = ", ".join(f"{k} {v}" for k, v in counts.items()) + f"; facility subsets {len(set(subsets))}"
    report(capsys, "single-step oracle equivalence", not problems, detail + ("; " + "; ".join(problems[:5]) if problems else ""))


def test_coffee_cafe2_increase_costs_2612(capsys, cassette_dir):
    d = get_domain("coffee")
    case = d.case("co-001")
    run = d.reference_run(case, timeout=120.0)
    cfg = PipelineConfig(cassette_mode="replay", cassette_path=str(cassette_dir / "happy_coffee.ndjson"))
    result = solve_query(d.problem_input(case), cfg)
    values = (json_number(run.value), d.oracle_optimal(case, use_cache=False), result.objective_value)
    ok = "29%" in case.query and "cafe2" in case.query and values == (2612, 2612, 2612)
    report(capsys, "coffee 29% cafe2 objective", ok, f"reference/oracle/pipeline = {values}")


def test_frame_axiom_property(capsys):
    rng = random.Random(20240601)
    violations, traces = [], 0
    per_domain = 1000 // len(MULTI_STEP)
    for domain_id in MULTI_STEP:
        d = get_domain(domain_id)
        for _ in range(per_domain):
            case = rng.choice(d.cases)
            plan = random_walk(d, case, rng.randint(1, 8), rng)
            traces += 1
            for v in frame_violations(d, case, plan):
                violations.append(f"{case.id} {[a.label for a in plan]}: {v}")
    report(capsys, "frame axioms match simulator", traces >= 1000 and not violations, f"{traces} traces, {len(violations)} violations")


def test_exactly_one_action(capsys, multi_runs):
    runs, _ = multi_runs
    bad = []
    steps = 0
    for key, run in runs.items():
        if run.outcome is None or run.outcome.status != "sat":
            continue
        counts = actions_per_step(run.outcome.problem, run.outcome.model)
        steps += len(counts)
        if any(c != 1 for c in counts):
            bad.append(f"{key[1]}: {counts}")
    rng = random.Random(77)
    probes = unsat = 0
    while probes < 50:
        d = get_domain(rng.choice(MULTI_STEP))
        case = rng.choice(d.cases)
        plan = random_walk(d, case, rng.randint(1, 6), rng)
        if not plan:
            continue
        probes += 1
        method = rng.choice(("pb", "pairwise"))
        unsat += second_action_is_unsat(d, case, plan, rng.randrange(len(plan)), rng, method)
    ok = not bad and unsat == probes
    report(capsys, "exactly one action per step", ok, f"{steps} steps in {len(runs)} models, {unsat}/{probes} second-action probes unsat")


def _calls(result):
    out = {}
    for r in result.stage_trace:
        if r.kind == "chat":
            out[r.stage] = out.get(r.stage, 0) + 1
    return out


def _replay(sc, cassette_dir):
    d = get_domain(sc["domain"])
    cfg = PipelineConfig(cassette_mode="replay", cassette_path=str(cassette_dir / f"{sc['name']}.ndjson"))
    return solve_query(d.problem_input(d.case(sc["query"])), cfg)


def test_pipeline_contracts_under_replay(capsys, manifest, cassette_dir):
    names = {sc["name"] for sc in manifest["scenarios"]}
    required = {"happy_coffee", "formatter_mismatch", "unsat_coffee"}
    required |= {f"codegen_fail_{k}" for k in range(1, 6)} | {f"assess_loops_{k}" for k in range(1, 6)}
    problems = [f"missing scenario {n}" for n in sorted(required - names)]
    for sc in manifest["scenarios"]:
        e = sc["expect"]
        dumps = []
        for _ in range(3):
            result = _replay(sc, cassette_dir)
            dumps.append(json.dumps(result.to_dict(include_durations=False), sort_keys=True))
        if len(set(dumps)) != 1:
            problems.append(f"{sc['name']}: runs differ")
        calls = _calls(result)
        if result.status != e["status"] or result.assess_loops != e["assess_loops"]:
            problems.append(f"{sc['name']}: {result.status}/{result.assess_loops} vs {e['status']}/{e['assess_loops']}")
        if any(calls.get(s, 0) != n for s, n in e["stage_calls"].items()):
            problems.append(f"{sc['name']}: stage calls {calls} vs {e['stage_calls']}")
        if e["objective_value"] is not None and result.objective_value != e["objective_value"]:
            problems.append(f"{sc['name']}: objective {result.objective_value}")
    detail = f"{len(manifest['scenarios'])} scenarios x 3 runs"
    report(capsys, "pipeline contracts under replay", not problems, detail + ("; " + "; ".join(problems[:5]) if problems else ""))


def test_dsl_robustness(capsys):
    mismatches = []

    @settings(max_examples=100, deadline=None, database=None)
    @given(programs)
    def round_trip(prog):
        stmts = tuple(
            A.ParamDecl(s.name, s.index, s.sort, normalize_fractions(s.value)) if isinstance(s, A.ParamDecl) else s
            for s in prog.statements
        )
        prog = A.Program(stmts)
        if parse(print_program(prog)) != prog:
            mismatches.append(print_program(prog))

    round_trip()
    rng = random.Random(99)
    seeds = [get_domain(d).reference_source for d in SINGLE_STEP + MULTI_STEP]
    crashes, errors, asts = [], 0, 0
    for src in mutations(seeds, 10_000, rng):
        try:
            parse(src)
            asts += 1
        except FplSyntaxError as exc:
            if exc.line < 1 or exc.col < 1:
                crashes.append(f"unpositioned error: {exc}")
            errors += 1
        except Exception as exc:  # anything else is a parser crash
            crashes.append(repr(exc))
    ok = not mismatches and not crashes and asts + errors == 10_000
    detail = f"100 round-trips, {len(mismatches)} mismatches; 10000 mutations: {asts} ASTs, {errors} positioned errors, {len(crashes)} crashes"
    report(capsys, "DSL robustness", ok, detail)


PIGEONHOLE = (
    "```fpl\nset P = 1..12; set H = 1..11; var in_[P, H]: Bool;\n"
    "assert forall p in P: exists h in H: in_[p, h];\n"
    "assert forall h in H, p in P, q in P where p < q: not (in_[p, h] and in_[q, h]);\n```"
)


def test_budget_enforcement(capsys, manifest, cassette_dir):
    by_name = {sc["name"]: sc for sc in manifest["scenarios"]}
    problems = []
    defaults = PipelineConfig()
    if (defaults.max_regen, defaults.max_assess_loops, defaults.solver_timeout) != (5, 5, 900.0) or DEFAULT_TIMEOUT != 900.0:
        problems.append("defaults are not 5 regenerations, 5 loops, 15 minutes")
    regen = _replay(by_name["codegen_fail_5"], cassette_dir)
    if regen.status != "budget_exhausted" or _calls(regen).get("codegen") != 5:
        problems.append(f"codegen regen stop: {regen.status} {_calls(regen)}")
    formulator = _replay(by_name["formulator_budget"], cassette_dir)
    if formulator.status != "budget_exhausted" or _calls(formulator).get("formulator") != 5:
        problems.append(f"formulator regen stop: {formulator.status} {_calls(formulator)}")
    loops = _replay(by_name["assess_budget"], cassette_dir)
    if loops.status != "budget_exhausted" or loops.assess_loops != 5:
        problems.append(f"assess stop: {loops.status} {loops.assess_loops}")

    d = get_domain("coffee")
    cfg = PipelineConfig(cassette_mode="passthrough", solver_timeout=2.0)
    responder = ScriptedResponder(ReferenceResponder(d), {"codegen": [PIGEONHOLE] * 10})
    start = time.monotonic()
    result = Pipeline(cfg, ChatClient(Cassette(mode="passthrough"), responder), d.schema).run(d.problem_input(d.case("co-001")))
    pipeline_elapsed = time.monotonic() - start
    checks = [r for r in result.stage_trace if r.stage == "solver" and r.kind == "check"]
    if not checks or any(r.detail != "timeout" or r.duration > 3.0 for r in checks) or result.status != "runtime_error":
        problems.append(f"pipeline solver cap: {result.status} {[(r.detail, round(r.duration, 2)) for r in checks]}")
    prog = parse(PIGEONHOLE.split("\n", 1)[1].rsplit("```", 1)[0])
    start = time.monotonic()
    outcome = solve(lower(prog, typecheck(prog, {})), timeout=2.0)
    direct = time.monotonic() - start
    if outcome.status != "timeout" or direct > 3.0:
        problems.append(f"direct solve: {outcome.status} after {direct:.2f}s")
    detail = (
        f"codegen {regen.status} after {_calls(regen).get('codegen')}, formulator after {_calls(formulator).get('formulator')}, "
        f"assess {loops.status} after {loops.assess_loops} loops; 2s cap: solve {direct:.2f}s, pipeline {pipeline_elapsed:.2f}s"
    )
    report(capsys, "budget enforcement", not problems, detail + ("; " + "; ".join(problems) if problems else ""))


def test_live_blocksworld_smoke(capsys):
    if not os.environ.get("FPLAN_API_KEY"):
        with capsys.disabled():
            print("\nSKIP  live blocksworld smoke (optional)  set FPLAN_API_KEY to run", flush=True)
        pytest.skip("live smoke needs FPLAN_API_KEY")
    from fplan.bench import run_benchmark

    cfg = PipelineConfig(cassette_mode="passthrough", provider="openai", model_id=os.environ.get("FPLAN_MODEL", "gpt-4o"))
    run = run_benchmark("blocksworld", "first:10", cfg, concurrency=2)
    d = get_domain("blocksworld")
    bad = []
    for cid, result in run.results.items():
        passed = result.assessments and all(result.assessments[-1].ratings)
        if result.status == "plan" and passed and not d.validate_plan(d.case(cid), result.plan_data).valid:
            bad.append(cid)
    report(capsys, "live blocksworld smoke (optional)", not bad, f"{len(run.records)} queries, self-assessed plans failing validation: {bad}")


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-v", "-rs"]))
