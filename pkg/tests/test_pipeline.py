import json

import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from fplan.domains import get_domain
from fplan.ir import PLAN_STATUSES, PlanResult, ProblemDefinition
from fplan.llm.chat import Cassette, ChatClient, NetworkError
from fplan.llm.reference import (
    GARBAGE,
    ReferenceResponder,
    ScriptedResponder,
    broken_program,
    perturbed_plan,
    reject_step,
    reworded,
)
from fplan.llm.stages import compile_program
from fplan.pipeline import (
    EXIT_CODES,
    IllegalTransition,
    Pipeline,
    PipelineConfig,
    StageMismatch,
    initial_state,
    resume,
    solve_query,
)


def replay_scenario(sc, cassette_dir):
    domain = get_domain(sc["domain"])
    cfg = PipelineConfig(cassette_mode="replay", cassette_path=str(cassette_dir / f"{sc['name']}.ndjson"))
    case = domain.case(sc["query"])
    return domain, case, solve_query(domain.problem_input(case), cfg)


def calls(result):
    out = {}
    for r in result.stage_trace:
        if r.kind == "chat":
            out[r.stage] = out.get(r.stage, 0) + 1
    return out


def pytest_generate_tests(metafunc):
    if "scenario" in metafunc.fixturenames:
        from conftest import CASSETTES

        scs = json.loads((CASSETTES / "manifest.json").read_text())["scenarios"]
        metafunc.parametrize("scenario", scs, ids=[s["name"] for s in scs])


def test_scenario_replays(scenario, cassette_dir):
    domain, case, result = replay_scenario(scenario, cassette_dir)
    e = scenario["expect"]
    assert result.status == e["status"], result.detail
    assert result.assess_loops == e["assess_loops"]
    got = calls(result)
    for stage, n in e["stage_calls"].items():
        assert got.get(stage, 0) == n, stage
    if e["objective_value"] is not None:
        assert result.objective_value == e["objective_value"]
    issues = sorted({r.stage for r in result.stage_trace if r.kind == "issue"} & {"formatter"})
    assert issues == sorted(e["issues"])
    if result.status == "plan":
        assert domain.validate_plan(case, result.plan_data).valid
    if result.status == "budget_exhausted":
        assert result.plan is None


def test_replay_is_bit_identical(manifest, cassette_dir):
    for sc in manifest["scenarios"][:6]:
        runs = [json.dumps(replay_scenario(sc, cassette_dir)[2].to_dict(include_durations=False), sort_keys=True) for _ in range(3)]
        assert runs[0] == runs[1] == runs[2], sc["name"]


def test_result_round_trip(manifest, cassette_dir):
    sc = manifest["scenarios"][0]
    result = replay_scenario(sc, cassette_dir)[2]
    assert PlanResult.from_dict(json.loads(json.dumps(result.to_dict()))) == result


def test_happy_coffee_matches_vendored_optimum(cassette_dir):
    sc = {"name": "happy_coffee", "domain": "coffee", "query": "co-001"}
    _, _, result = replay_scenario(sc, cassette_dir)
    assert result.status == "plan" and result.objective_value == 2612


def test_exit_codes():
    assert EXIT_CODES == {"plan": 0, "infeasible": 2, "budget_exhausted": 3, "runtime_error": 4}
    assert set(EXIT_CODES) == set(PLAN_STATUSES)


# -- state machine ---------------------------------------------------------------


@pytest.fixture(scope="module")
def coffee():
    dom = get_domain("coffee")
    case = dom.case("co-001")
    return dom, case, dom.problem_input(case)


def test_illegal_transition(coffee):
    _, _, problem = coffee
    state = initial_state(problem, multi_step=False)
    assert state.phase == "define"
    with pytest.raises(IllegalTransition):
        state.goto("solve")
    state.goto("formulate")
    state.goto("encode")
    with pytest.raises(IllegalTransition):
        state.goto("define")
    assert initial_state(problem, multi_step=True).phase == "formulate"


def test_resume_rewinds_and_clears(coffee):
    dom, case, problem = coffee
    state = initial_state(problem, multi_step=False)
    state.phase = "assess"
    state.feedback = "old"
    state.decoded = {"x": 1}
    enc = compile_program(dom.program_source(case), problem)
    new = resume(state, "encoding", enc)
    assert new.phase == "solve" and new.encoding is enc
    assert new.decoded is None and new.feedback == ""
    assert state.decoded == {"x": 1}
    d = ProblemDefinition("g", (), "", ("c",))
    assert resume(state, "definition", d).phase == "formulate"
    with pytest.raises(StageMismatch):
        resume(state, "encoding", d)
    with pytest.raises(StageMismatch):
        resume(state, "bogus", d)


def test_definition_resume_rejected_for_multi_step():
    dom = get_domain("blocksworld")
    state = initial_state(dom.problem_input(dom.case("bw-000")), multi_step=True)
    with pytest.raises(StageMismatch):
        resume(state, "definition", ProblemDefinition("g", (), "", ("c",)))


def test_network_failure_is_runtime_error(coffee):
    _, _, problem = coffee

    def down(_request):
        raise NetworkError("connection refused")

    client = ChatClient(Cassette(mode="passthrough"), down, sleep=lambda s: None)
    result = solve_query(problem, PipelineConfig(cassette_mode="passthrough"), client)
    assert result.status == "runtime_error"
    assert "unreachable" in result.detail


def run_scripted(domain_id, query, script, cfg=PipelineConfig(cassette_mode="passthrough")):
    dom = get_domain(domain_id)
    responder = ScriptedResponder(ReferenceResponder(dom), script)
    client = ChatClient(Cassette(mode="passthrough"), responder, cfg.model_id)
    return Pipeline(cfg, client, dom.schema).run(dom.problem_input(dom.case(query)))


def test_budget_is_configurable():
    cfg = PipelineConfig(cassette_mode="passthrough", max_regen=2)
    result = run_scripted("blocksworld", "bw-000", {"codegen": [broken_program] * 5}, cfg)
    assert result.status == "budget_exhausted"
    assert calls(result)["codegen"] == 2


def test_rejection_with_fix_resumes():
    dom = get_domain("blocksworld")
    src = dom.program_source(dom.case("bw-000"))
    result = run_scripted("blocksworld", "bw-000", {"assess": [reject_step(3, src)]})
    assert result.status == "plan"
    assert result.assess_loops == 2
    assert calls(result)["codegen"] == 1
    assert result.assessments[0].modified_step == "encoding"


def test_rejection_without_fix_regenerates_with_revision_turn():
    result = run_scripted("blocksworld", "bw-000", {"assess": [reject_step(3, None)], "codegen": [None, reworded()]})
    assert result.status == "plan"
    assert calls(result)["codegen"] == 2


FAULTS = {
    "formulator": st.sampled_from([None, GARBAGE, reworded()]),
    "codegen": st.sampled_from([None, GARBAGE, broken_program]),
    "formatter": st.sampled_from([None, GARBAGE, perturbed_plan]),
    "assess": st.sampled_from([None, GARBAGE, reject_step(2, None), reject_step(3, None), reject_step(1, "x")]),
}


@settings(max_examples=25, deadline=None, suppress_health_check=[HealthCheck.too_slow])
@given(st.fixed_dictionaries({k: st.lists(v, max_size=12) for k, v in FAULTS.items()}))
def test_every_run_terminates_within_budget(script):
    cfg = PipelineConfig(cassette_mode="passthrough", max_regen=3, max_assess_loops=3, solver_timeout=30)
    result = run_scripted("blocksworld", "bw-000", script, cfg)
    assert result.status in PLAN_STATUSES
    assert result.assess_loops <= cfg.max_assess_loops
    assert all(r.attempt <= cfg.max_regen for r in result.stage_trace if r.kind == "chat")
    if result.status == "plan":
        dom = get_domain("blocksworld")
        assert dom.validate_plan(dom.case("bw-000"), result.plan_data).valid
