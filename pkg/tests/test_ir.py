import json

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fplan.domains import get_domain
from fplan.ir import (
    AssessmentReport,
    BackgroundItem,
    FormulationIR,
    NonPositiveResult,
    PlanResult,
    ProblemDefinition,
    ProblemInput,
    StageRecord,
    UnboundName,
    evaluate_cardinality,
    evaluation_order,
    validate_formulation,
)
from fplan.llm.prompts import load_template_text
from fplan.llm.stages import loads_lenient


def var(name, source="query", card=1, smt=True, value="v", req=None):
    return {
        "name": name,
        "SMT_variable": smt,
        "number_of_variables": card,
        "data_source": source,
        "value": value,
        "specific_requirement": req,
    }


COFFEE_IR = {
    "variable_1": var("units_supplier_to_roastery", "capacity_in_supplier, shipping_cost_from_supplier_to_roastery", 6),
    "variable_2": var("light_roasted", "roasting_cost_light, shipping_cost_from_roastery_to_cafe", 6),
    "variable_3": var("dark_roasted", "roasting_cost_dark, shipping_cost_from_roastery_to_cafe", 6),
    "variable_4": var("light_demand", "light_coffee_needed_for_cafe", 3, smt=False),
    "variable_5": var("dark_demand", "dark_coffee_needed_for_cafe", 3, smt=False),
    "variable_6": var("increased_light_demand_cafe2", "query, variable_4", "math.ceil(20 * 1.29)", smt=False),
    "variable_7": var("increased_dark_demand_cafe2", "query, variable_5", "math.ceil(20 * 1.29)", smt=False),
    "variable_8": var(
        "total_cost",
        "variable_1, variable_2, variable_3, variable_6, variable_7",
        1,
        req="minimize",
    ),
}


@pytest.fixture(scope="module")
def coffee_input():
    d = get_domain("coffee")
    return d.problem_input(d.case("co-001"))


def test_coffee_formulation_is_valid(coffee_input):
    ir = FormulationIR.from_dict(COFFEE_IR)
    assert len(list(ir.variables())) == 8
    assert validate_formulation(ir, coffee_input) == []


def test_unresolved_reference(coffee_input):
    data = {**COFFEE_IR, "variable_9": var("extra", "variable_42")}
    issues = validate_formulation(FormulationIR.from_dict(data), coffee_input)
    assert [i.kind for i in issues] == ["UnresolvedReference"]


def test_missing_field_and_alias(coffee_input):
    entry = var("x")
    entry["how_to_pick"] = entry.pop("value")
    assert validate_formulation(FormulationIR.from_dict({"variable_1": entry}), coffee_input) == []
    del entry["data_source"]
    issues = validate_formulation(FormulationIR.from_dict({"variable_1": entry}), coffee_input)
    assert any(i.kind == "MissingField" for i in issues)


def test_cycle_is_reported(coffee_input):
    data = {"variable_1": var("a", "variable_2"), "variable_2": var("b", "variable_1")}
    issues = validate_formulation(FormulationIR.from_dict(data), coffee_input)
    assert [i.kind for i in issues] == ["CyclicReference"]


def _logistics_example():
    text = load_template_text("formulator_multi")
    body = text[text.index("JSON description:") + len("JSON description:"):]
    return loads_lenient(body[: body.index("\n}\n") + 3])


def test_template_multi_step_example_validates():
    bw = get_domain("blocksworld")
    ir = FormulationIR.from_dict(_logistics_example())
    assert ir.kind == "multi_step"
    assert validate_formulation(ir, bw.problem_input(bw.cases[0])) == []


def test_missing_update_section():
    bw = get_domain("blocksworld")
    data = _logistics_example()
    del data["update"]
    issues = validate_formulation(FormulationIR.from_dict(data), bw.problem_input(bw.cases[0]))
    assert [(i.kind, i.where) for i in issues] == [("MissingSection", "update")]


def test_duplicate_ids_across_sections():
    bw = get_domain("blocksworld")
    data = _logistics_example()
    data["goal"]["variable_1"] = data["objects"]["variable_1"]
    issues = validate_formulation(FormulationIR.from_dict(data), bw.problem_input(bw.cases[0]))
    assert any(i.kind == "DuplicateId" for i in issues)


def test_validation_is_idempotent(coffee_input):
    ir = FormulationIR.from_dict({**COFFEE_IR, "variable_9": var("bad", "nowhere", 0)})
    first = validate_formulation(ir, coffee_input)
    assert first == validate_formulation(ir, coffee_input)
    assert ir == FormulationIR.from_dict({**COFFEE_IR, "variable_9": var("bad", "nowhere", 0)})


def test_evaluation_order_respects_dependencies():
    ir = FormulationIR.from_dict(COFFEE_IR)
    order = evaluation_order(ir)
    for _, vid, v in ir.variables():
        for ref in v.references():
            if ref in order:
                assert order.index(ref) < order.index(vid)


@pytest.mark.parametrize(
    "expr,expected",
    [("ceil(20 * 1.09)", 22), ("math.ceil(20 * 1.09)", 22), (10, 10), ("floor(7 / 2)", 3), ("n + 1", 5)],
)
def test_cardinality(expr, expected):
    assert evaluate_cardinality(expr, {"n": 4}) == expected


def test_cardinality_errors():
    with pytest.raises(UnboundName):
        evaluate_cardinality("m * 2", {})
    with pytest.raises(NonPositiveResult):
        evaluate_cardinality("floor(1 / 2)")
    with pytest.raises(ValueError):
        evaluate_cardinality("__import__('os')")


def test_problem_input_invariants():
    with pytest.raises(ValueError):
        ProblemInput("", (), "q")
    with pytest.raises(ValueError):
        ProblemInput("t", (BackgroundItem("a", "data", 1), BackgroundItem("a", "data", 2)), "q")


def test_assessment_report_rules():
    with pytest.raises(ValueError):
        AssessmentReport((1, 1, 1), ("", "", ""), "x", "definition")
    with pytest.raises(ValueError):
        AssessmentReport((1, 0, 0), ("", "", ""), "x", "encoding")
    r = AssessmentReport((1, 0, 0), ("a", "b", "c"), "x", "formulation")
    assert r.first_incorrect() == "formulation" and not r.passed


def test_plan_result_invariants():
    with pytest.raises(ValueError):
        PlanResult("plan", None)
    with pytest.raises(ValueError):
        PlanResult("infeasible", {"x": 1})
    with pytest.raises(ValueError):
        PlanResult.from_dict({"schema_version": 99, "status": "infeasible"})


# -- serialization round trips ---------------------------------------------------

text = st.text(max_size=12)
json_scalar = st.one_of(st.integers(-50, 50), st.booleans(), text, st.none())
json_value = st.recursive(json_scalar, lambda s: st.lists(s, max_size=3) | st.dictionaries(text, s, max_size=3), max_leaves=6)

problem_inputs = st.builds(
    ProblemInput,
    text.filter(str.strip),
    st.lists(
        st.builds(BackgroundItem, st.from_regex(r"[a-z]{1,6}", fullmatch=True), st.just("data"), json_value),
        max_size=3,
        unique_by=lambda b: b.name,
    ).map(tuple),
    text.filter(str.strip),
    st.none() | st.just("coffee"),
)
definitions = st.builds(ProblemDefinition, text, st.lists(text, max_size=3).map(tuple), text, st.lists(text, max_size=3).map(tuple))
ir_vars = st.fixed_dictionaries(
    {
        "name": text,
        "SMT_variable": st.booleans() | st.none(),
        "number_of_variables": st.integers(1, 9) | text | st.none(),
        "data_source": text | st.none(),
        "value": text,
        "specific_requirement": text | st.none(),
    }
)
single_irs = st.dictionaries(st.from_regex(r"variable_[0-9]{1,2}", fullmatch=True), ir_vars, max_size=4)
multi_irs = st.fixed_dictionaries(
    {s: st.dictionaries(st.from_regex(r"[a-z]{1,5}_[0-9]", fullmatch=True), ir_vars, max_size=2) for s in ("objects", "predicates", "actions", "update", "goal")}
)
records = st.builds(StageRecord, st.sampled_from(["definer", "assess"]), st.just("chat"), st.integers(1, 5), st.integers(1, 5), st.floats(0, 9), st.integers(0, 99), st.integers(0, 99), text)
reports = st.tuples(st.integers(0, 1), st.integers(0, 1), st.integers(0, 1)).flatmap(
    lambda r: st.builds(
        AssessmentReport,
        st.just(r),
        st.tuples(text, text, text),
        st.none() if all(r) else st.none() | text,
        st.just(None if all(r) else ("definition", "formulation", "encoding")[r.index(0)]),
    )
)
plan_results = st.one_of(
    st.builds(PlanResult, st.just("plan"), st.dictionaries(text, json_value, min_size=1, max_size=3), st.none() | st.integers(), st.none() | st.integers(0, 9), st.lists(records, max_size=3).map(tuple), st.lists(reports, max_size=2).map(tuple), json_value, text),
    st.builds(PlanResult, st.sampled_from(["infeasible", "runtime_error", "budget_exhausted"]), st.none(), st.none(), st.none(), st.lists(records, max_size=3).map(tuple), st.lists(reports, max_size=2).map(tuple), json_value, text),
)


@settings(max_examples=60, deadline=None)
@given(problem_inputs)
def test_problem_input_round_trip(p):
    assert ProblemInput.from_dict(json.loads(json.dumps(p.to_dict()))) == p


@settings(max_examples=60, deadline=None)
@given(definitions)
def test_definition_round_trip(d):
    assert ProblemDefinition.from_dict(json.loads(json.dumps(d.to_dict()))) == d


@settings(max_examples=60, deadline=None)
@given(single_irs | multi_irs)
def test_formulation_round_trip(data):
    ir = FormulationIR.from_dict(data)
    assert FormulationIR.from_dict(json.loads(json.dumps(ir.to_dict()))) == ir
    assert ir.to_dict() == data


@settings(max_examples=60, deadline=None)
@given(plan_results)
def test_plan_result_round_trip(r):
    assert PlanResult.from_dict(json.loads(json.dumps(r.to_dict()))) == r
