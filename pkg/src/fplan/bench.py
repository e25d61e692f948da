"""Benchmark harness: run a query slice, validate every plan, aggregate."""

from __future__ import annotations

import csv
import io
import json
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Callable, Mapping, Sequence

from .domains import INFEASIBLE, QueryCase, get_domain
from .ir import PlanResult
from .llm.chat import CassetteMiss, ChatClient
from .pipeline import Pipeline, PipelineConfig, make_client
from .smt import SchemaMismatch

STAGE_COLUMNS = ("definer", "formulator", "solver", "formatter", "codegen", "assess")
CSV_COLUMNS = (
    "query_id",
    "query_type",
    "status",
    "valid",
    "optimal",
    "value",
    "oracle",
    "horizon",
    "assess_loops",
    *(f"{s}_seconds" for s in STAGE_COLUMNS),
    "prompt_tokens",
    "completion_tokens",
    "detail",
)


class EmptySlice(ValueError):
    pass


class MissingCassetteEntries(RuntimeError):
    def __init__(self, misses: Sequence[tuple[str, str]]):
        lines = "\n".join(f"  {qid}: {fp}" for qid, fp in misses)
        super().__init__(f"{len(misses)} queries need responses missing from the cassette:\n{lines}")
        self.misses = tuple(misses)


@dataclass(frozen=True)
class QueryRecord:
    query_id: str
    query_type: str
    status: str
    valid: bool
    optimal: bool
    value: Any
    oracle: Any
    horizon: int | None
    assess_loops: int
    stage_seconds: Mapping[str, float]
    prompt_tokens: int
    completion_tokens: int
    detail: str = ""

    def row(self) -> dict:
        out = {k: v for k, v in asdict(self).items() if k != "stage_seconds"}
        for s in STAGE_COLUMNS:
            out[f"{s}_seconds"] = round(self.stage_seconds.get(s, 0.0), 6)
        return out


@dataclass
class BenchmarkRun:
    domain_id: str
    slice: str
    records: list[QueryRecord]
    aggregates: dict = field(default_factory=dict)
    results: dict[str, PlanResult] = field(default_factory=dict, repr=False)


def aggregate(records: Sequence[QueryRecord], price_table: Mapping[str, Mapping[str, float]] | None = None, model_id: str = "") -> dict:
    n = len(records)
    ok = sum(r.valid for r in records)
    best = sum(r.optimal for r in records)
    statuses: dict[str, int] = {}
    for r in records:
        statuses[r.status] = statuses.get(r.status, 0) + 1
    prompt = sum(r.prompt_tokens for r in records)
    completion = sum(r.completion_tokens for r in records)
    out = {
        "queries": n,
        "optimal": best,
        "successful": ok,
        "optimal_rate": best / n if n else 0.0,
        "success_rate": ok / n if n else 0.0,
        "status_counts": dict(sorted(statuses.items())),
        "mean_stage_seconds": {
            s: (sum(r.stage_seconds.get(s, 0.0) for r in records) / n if n else 0.0) for s in STAGE_COLUMNS
        },
        "prompt_tokens": prompt,
        "completion_tokens": completion,
    }
    price = (price_table or {}).get(model_id)
    if price:
        out["cost"] = prompt / 1000 * price.get("prompt", 0.0) + completion / 1000 * price.get("completion", 0.0)
    return out


def _record(domain, case: QueryCase, result: PlanResult) -> QueryRecord:
    oracle = domain.oracle_optimal(case)
    valid = optimal = False
    value = None
    detail = result.detail
    if result.status == "plan":
        try:
            verdict = domain.validate_plan(case, result.plan_data)
            valid, optimal, value = verdict.valid, verdict.optimal, verdict.value
            if verdict.diagnostics:
                detail = "; ".join(verdict.diagnostics)
        except SchemaMismatch as exc:
            detail = f"schema mismatch: {exc}"
    elif result.status == "infeasible" and oracle == INFEASIBLE:
        # declaring a truly infeasible query infeasible is the right answer
        valid = optimal = True
        value = INFEASIBLE
    seconds: dict[str, float] = {}
    prompt = completion = 0
    for rec in result.stage_trace:
        seconds[rec.stage] = seconds.get(rec.stage, 0.0) + rec.duration
        prompt += rec.prompt_tokens
        completion += rec.completion_tokens
    return QueryRecord(
        case.id,
        case.query_type,
        result.status,
        valid,
        optimal,
        value,
        oracle,
        result.horizon,
        result.assess_loops,
        seconds,
        prompt,
        completion,
        detail,
    )


def run_benchmark(
    domain_id: str,
    slice_name: str = "desk",
    cfg: PipelineConfig = PipelineConfig(),
    concurrency: int = 1,
    client: ChatClient | None = None,
    price_table: Mapping[str, Mapping[str, float]] | None = None,
    progress: Callable[[QueryRecord], None] | None = None,
) -> BenchmarkRun:
    if concurrency < 1:
        raise ValueError("concurrency must be a positive integer")
    domain = get_domain(domain_id)
    cases = domain.slice(slice_name)
    if not cases:
        raise EmptySlice(f"{domain_id}: slice {slice_name!r} selects no queries")
    client = client or make_client(cfg, domain_id)

    def one(case: QueryCase):
        try:
            result = Pipeline(cfg, client, domain.schema).run(domain.problem_input(case))
        except CassetteMiss as miss:
            return case, None, miss.fingerprint
        return case, result, None

    with ThreadPoolExecutor(max_workers=concurrency) as pool:
        outcomes = list(pool.map(one, cases))
    misses = sorted((c.id, fp) for c, _, fp in outcomes if fp is not None)
    if misses:
        raise MissingCassetteEntries(misses)
    records, results = [], {}
    for case, result, _ in sorted(outcomes, key=lambda o: o[0].id):
        rec = _record(domain, case, result)
        records.append(rec)
        results[case.id] = result
        if progress:
            progress(rec)
    return BenchmarkRun(domain_id, slice_name, records, aggregate(records, price_table, cfg.model_id), results)


def to_json(run: BenchmarkRun) -> str:
    data = {
        "domain": run.domain_id,
        "slice": run.slice,
        "aggregates": run.aggregates,
        "queries": [r.row() for r in run.records],
    }
    return json.dumps(data, indent=2, sort_keys=True, default=str) + "\n"


def to_csv(run: BenchmarkRun) -> str:
    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=CSV_COLUMNS, lineterminator="\n")
    writer.writeheader()
    for r in run.records:
        writer.writerow(r.row())
    return buf.getvalue()


def to_summary(run: BenchmarkRun) -> str:
    a = run.aggregates
    lines = [
        f"domain {run.domain_id}  slice {run.slice}  queries {a['queries']}",
        f"optimal rate  {a['optimal_rate']:.3f}  ({a['optimal']}/{a['queries']})",
        f"success rate  {a['success_rate']:.3f}  ({a['successful']}/{a['queries']})",
        "status        " + ", ".join(f"{k} {v}" for k, v in a["status_counts"].items()),
        "mean seconds  " + ", ".join(f"{s} {a['mean_stage_seconds'][s]:.3f}" for s in STAGE_COLUMNS),
        f"tokens        prompt {a['prompt_tokens']}  completion {a['completion_tokens']}",
    ]
    if "cost" in a:
        lines.append(f"cost          ${a['cost']:.4f}")
    lines.append("")
    width = max(len(r.query_id) for r in run.records)
    for r in run.records:
        mark = "optimal" if r.optimal else ("valid" if r.valid else "-")
        lines.append(f"{r.query_id:<{width}}  {r.status:<16} {mark:<8} value={r.value} oracle={r.oracle}")
    return "\n".join(lines) + "\n"


RENDERERS = {"json": (to_json, "json"), "csv": (to_csv, "csv"), "summary": (to_summary, "txt")}


def report(run: BenchmarkRun, out_dir: str | Path, formats: Sequence[str] = ("json", "csv", "summary")) -> list[Path]:
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for fmt in formats:
        if fmt not in RENDERERS:
            raise ValueError(f"unknown report format {fmt!r}")
        render, ext = RENDERERS[fmt]
        path = out / f"bench_{run.domain_id}.{ext}"
        path.write_text(render(run), encoding="utf-8")
        written.append(path)
    return written
