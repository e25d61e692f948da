"""Record the curated cassette corpus under tests/cassettes.

Each scenario scripts faults into the offline reference responder, records
every chat exchange, then replays the cassette and checks the outcome the
script forces.  The manifest holds those forced outcomes for the tests.
"""

from __future__ import annotations

import json
import sys
from pathlib import Path

from fplan.bench import run_benchmark
from fplan.domains import get_domain
from fplan.llm.chat import Cassette, ChatClient, ChatRequest
from fplan.llm.reference import (
    GARBAGE,
    ReferenceResponder,
    ScriptedResponder,
    broken_program,
    perturbed_plan,
    reject_step,
    revised_formulation,
    reworded,
)
from fplan.pipeline import Pipeline, PipelineConfig

OUT = Path(__file__).resolve().parents[1] / "tests" / "cassettes"


def scenario(name, domain, query, script, status, loops, calls=None, objective=None, issues=()):
    return {
        "name": name,
        "domain": domain,
        "query": query,
        "script": script,
        "expect": {
            "status": status,
            "assess_loops": loops,
            "stage_calls": calls or {},
            "objective_value": objective,
            "issues": list(issues),
        },
    }


def scenarios():
    out = [
        scenario("happy_coffee", "coffee", "co-001", {}, "plan", 1, {"definer": 1, "formulator": 1, "codegen": 1, "formatter": 1, "assess": 1}, 2612),
        scenario("happy_blocksworld", "blocksworld", "bw-003", {}, "plan", 1, {"formulator": 1, "codegen": 1, "formatter": 1, "assess": 1}),
        scenario("happy_gripper", "gripper", "gr-000", {}, "plan", 1, {"formulator": 1, "codegen": 1}),
        scenario("unsat_coffee", "coffee", "co-005", {}, "infeasible", 1, {"assess": 1}),
        scenario("formatter_mismatch", "coffee", "co-000", {"formatter": [perturbed_plan]}, "plan", 1, {"formatter": 1, "assess": 1}, issues=["formatter"]),
        scenario("definer_garbage", "coffee", "co-000", {"definer": [GARBAGE, GARBAGE]}, "plan", 1, {"definer": 3}),
        scenario("formulator_garbage", "facility", "fa-001", {"formulator": [GARBAGE]}, "plan", 1, {"formulator": 2}),
        scenario("formulator_budget", "facility", "fa-001", {"formulator": [GARBAGE] * 5}, "budget_exhausted", 0, {"formulator": 5, "codegen": 0}),
        scenario("assessor_garbage", "workforce", "wf-001", {"assess": [GARBAGE]}, "plan", 2, {"assess": 2, "codegen": 1}),
        scenario("reject_encoding", "warehouse", "wh-001", {"assess": [reject_step(3, None)], "codegen": [None, reworded()]}, "plan", 2, {"assess": 2, "codegen": 2, "formulator": 1}),
        scenario("reject_definition_multi", "blocksworld", "bw-004", {"assess": [reject_step(1, "[[GOAL: ]] none")], "formulator": [None, reworded()]}, "plan", 2, {"assess": 2, "formulator": 2}),
        scenario("assess_budget", "coffee", "co-002", {"assess": [revised_formulation(i) for i in range(1, 6)]}, "budget_exhausted", 5, {"assess": 5, "formulator": 1, "codegen": 5}),
    ]
    for k in range(1, 6):
        calls = {"codegen": min(k + 1, 5)}
        status = "plan" if k < 5 else "budget_exhausted"
        out.append(scenario(f"codegen_fail_{k}", "coffee", "co-003", {"codegen": [broken_program] * k}, status, 1 if k < 5 else 0, calls))
    for k in range(1, 6):
        rejects = [revised_formulation(i) for i in range(1, k)]
        out.append(scenario(f"assess_loops_{k}", "coffee", "co-004", {"assess": rejects}, "plan", k, {"assess": k, "formulator": 1, "codegen": k}))
    return out


def stage_calls(result) -> dict:
    out: dict[str, int] = {}
    for r in result.stage_trace:
        if r.kind == "chat":
            out[r.stage] = out.get(r.stage, 0) + 1
    return out


def check(sc, result) -> list[str]:
    e = sc["expect"]
    errs = []
    if result.status != e["status"]:
        errs.append(f"status {result.status} != {e['status']} ({result.detail})")
    if result.assess_loops != e["assess_loops"]:
        errs.append(f"assess loops {result.assess_loops} != {e['assess_loops']}")
    calls = stage_calls(result)
    for st, n in e["stage_calls"].items():
        if calls.get(st, 0) != n:
            errs.append(f"{st} calls {calls.get(st, 0)} != {n}")
    if e["objective_value"] is not None and result.objective_value != e["objective_value"]:
        errs.append(f"objective {result.objective_value} != {e['objective_value']}")
    issues = sorted({r.stage for r in result.stage_trace if r.kind == "issue"} & {"formatter"})
    if issues != sorted(e["issues"]):
        errs.append(f"issues {issues} != {e['issues']}")
    return errs


def record(sc) -> Path:
    path = OUT / f"{sc['name']}.ndjson"
    path.unlink(missing_ok=True)
    domain = get_domain(sc["domain"])
    responder = ScriptedResponder(ReferenceResponder(domain), sc["script"])
    cfg = PipelineConfig(cassette_mode="record", cassette_path=str(path), provider="reference")
    client = ChatClient(Cassette(path, "record"), responder, cfg.model_id)
    case = domain.case(sc["query"])
    Pipeline(cfg, client, domain.schema).run(domain.problem_input(case))
    replay = PipelineConfig(cassette_mode="replay", cassette_path=str(path))
    result = Pipeline(replay, ChatClient(Cassette(path, "replay"), None, cfg.model_id), domain.schema).run(domain.problem_input(case))
    errs = check(sc, result)
    if errs:
        raise SystemExit(f"{sc['name']}: " + "; ".join(errs))
    return path


class PerQuery:
    """Scripts faults into the queries named in ``faults`` only."""

    def __init__(self, base: ReferenceResponder, faults: dict[str, dict]):
        self.base = base
        self.scripted = {qid: ScriptedResponder(base, script) for qid, script in faults.items()}

    def __call__(self, request: ChatRequest):
        prompt = request.messages[0][1]
        if self.base.stage_for(request) != "definer":
            qid = self.base.case_for(prompt).id
            if qid in self.scripted:
                return self.scripted[qid](request)
        return self.base(request)


def record_bench(name: str, domain_id: str, slice_name: str, faults: dict[str, dict]) -> dict:
    path = OUT / f"{name}.ndjson"
    path.unlink(missing_ok=True)
    domain = get_domain(domain_id)
    cfg = PipelineConfig(cassette_mode="record", cassette_path=str(path), provider="reference")
    client = ChatClient(Cassette(path, "record"), PerQuery(ReferenceResponder(domain), faults), cfg.model_id)
    run_benchmark(domain_id, slice_name, cfg, 1, client=client)
    replay = PipelineConfig(cassette_mode="replay", cassette_path=str(path))
    run = run_benchmark(domain_id, slice_name, replay, 4)
    return {"name": name, "domain": domain_id, "slice": slice_name, "faulted": sorted(faults), "aggregates": run.aggregates}


def main() -> int:
    OUT.mkdir(parents=True, exist_ok=True)
    manifest = []
    for sc in scenarios():
        record(sc)
        manifest.append({k: v for k, v in sc.items() if k != "script"})
        print(f"{sc['name']:<26} ok", file=sys.stderr)
    benches = [
        record_bench("bench_blocksworld", "blocksworld", "first:20", {}),
        record_bench("bench_mixed", "blocksworld", "first:10", {"bw-002": {"codegen": [broken_program] * 5}}),
    ]
    for b in benches:
        print(f"{b['name']:<26} optimal {b['aggregates']['optimal_rate']:.2f} success {b['aggregates']['success_rate']:.2f}", file=sys.stderr)
    data = {"scenarios": manifest, "benchmarks": [{k: b[k] for k in ("name", "domain", "slice", "faulted")} for b in benches]}
    (OUT / "manifest.json").write_text(json.dumps(data, indent=2, sort_keys=True) + "\n", encoding="utf-8")
    return 0


if __name__ == "__main__":
    sys.exit(main())
