"""Orchestration: define, formulate, encode, solve, format, assess, repeat."""

from __future__ import annotations

import dataclasses
import json
import time
from dataclasses import dataclass, field
from typing import Any, Mapping, Sequence

from .domains import DOMAIN_IDS, get_domain
from .ir import AssessmentReport, FormulationIR, PlanResult, ProblemDefinition, ProblemInput, StageRecord
from .llm.chat import Cassette, ChatClient, NetworkError, OpenAICompatibleProvider
from .llm.prompts import PromptTemplate, default_templates
from .llm.stages import (
    BudgetExhausted,
    Encoding,
    FormattedResult,
    FormatterMismatch,
    InvalidModification,
    ParseFailure,
    StageContext,
    formulation_text,
    run_assessor,
    run_definer,
    run_encoder_gen,
    run_formatter,
    run_formulator,
)
from .smt import (
    DEFAULT_TIMEOUT,
    DecodeError,
    HorizonConfig,
    LoweringError,
    PlanSchema,
    SchemaMismatch,
    SolveOutcome,
    TMaxExceeded,
    decode,
    lower,
    solve,
    solve_bounded_horizon,
)
from .smt.decode import json_number
from .smt.lower import DEFAULT_UNROLL_CAP

PHASES = ("define", "formulate", "encode", "solve", "format", "assess", "done", "failed")
TRANSITIONS = {
    "define": {"formulate", "failed"},
    "formulate": {"encode", "failed"},
    "encode": {"solve", "failed"},
    "solve": {"format", "failed"},
    "format": {"assess"},
    "assess": {"assess", "define", "formulate", "encode", "solve", "done", "failed"},
    "done": set(),
    "failed": set(),
}
EXIT_CODES = {"plan": 0, "infeasible": 2, "budget_exhausted": 3, "runtime_error": 4}
MULTI_STEP_SCHEMA = PlanSchema("multi_step", ({"name": "plan", "type": "actions"},))


class StageMismatch(Exception):
    pass


class IllegalTransition(RuntimeError):
    pass


@dataclass(frozen=True)
class PipelineConfig:
    max_regen: int = 5
    max_assess_loops: int = 5
    solver_timeout: float = DEFAULT_TIMEOUT
    horizon: HorizonConfig = HorizonConfig()
    cassette_mode: str = "replay"
    cassette_path: str | None = None
    provider: str = "openai"
    base_url: str | None = None
    model_id: str = "gpt-4o"
    temperature: float = 0.0
    max_tokens: int | None = None
    multi_step: bool | None = None
    exactly_one: str = "pb"
    unroll_cap: int = DEFAULT_UNROLL_CAP
    extra_examples: tuple[tuple[str, str], ...] = ()

    def __post_init__(self):
        if self.max_regen < 1 or self.max_assess_loops < 1:
            raise ValueError("retry budgets must be at least 1")
        if self.solver_timeout <= 0:
            raise ValueError("solver_timeout must be positive")

    def horizon_for_run(self) -> HorizonConfig:
        h = self.horizon
        return dataclasses.replace(
            h,
            per_check_timeout=min(h.per_check_timeout, self.solver_timeout),
            total_timeout=min(h.total_timeout, self.solver_timeout),
        )


@dataclass
class PipelineState:
    problem: ProblemInput
    multi_step: bool
    phase: str = "define"
    definition: ProblemDefinition | None = None
    formulation: FormulationIR | None = None
    encoding: Encoding | None = None
    outcome: SolveOutcome | None = None
    horizon: int | None = None
    decoded: Any = None
    feedback: str = ""
    formatted: FormattedResult | None = None
    assessments: list[AssessmentReport] = field(default_factory=list)
    assess_loops: int = 0
    stage_calls: dict[str, int] = field(default_factory=dict)
    trace: list[StageRecord] = field(default_factory=list)
    last_plan: Any = None
    status: str | None = None
    detail: str = ""
    retry_note: tuple[str, str] | None = None
    # (phase, previous answer, assessor reasoning) for a stage flagged without a usable fix
    revise: tuple[str, str, str] | None = None

    def goto(self, phase: str) -> None:
        if phase not in TRANSITIONS[self.phase]:
            raise IllegalTransition(f"{self.phase} -> {phase}")
        self.phase = phase

    def fail(self, status: str, detail: str) -> None:
        self.status, self.detail = status, detail
        self.goto("failed")


def initial_state(problem: ProblemInput, multi_step: bool) -> PipelineState:
    return PipelineState(problem, multi_step, phase="formulate" if multi_step else "define")


_DOWNSTREAM = ("formulation", "encoding", "outcome", "horizon", "decoded", "feedback", "formatted")


def resume(state: PipelineState, stage: str, artifact: Any) -> PipelineState:
    """New state with ``stage``'s artifact replaced and later work cleared."""
    if stage == "definition":
        if state.multi_step:
            raise StageMismatch("multi-step runs have no definition stage")
        if not isinstance(artifact, ProblemDefinition):
            raise StageMismatch("a definition replacement must be a ProblemDefinition")
        cleared, phase = _DOWNSTREAM, "formulate"
    elif stage == "formulation":
        if not isinstance(artifact, FormulationIR):
            raise StageMismatch("a formulation replacement must be a FormulationIR")
        cleared, phase = _DOWNSTREAM[1:], "encode"
    elif stage == "encoding":
        if not isinstance(artifact, Encoding):
            raise StageMismatch("an encoding replacement must be a compiled Encoding")
        cleared, phase = _DOWNSTREAM[2:], "solve"
    else:
        raise StageMismatch(f"unknown stage {stage!r}")
    reset = {name: ("" if name == "feedback" else None) for name in cleared}
    new = dataclasses.replace(
        state,
        assessments=list(state.assessments),
        stage_calls=dict(state.stage_calls),
        trace=list(state.trace),
        retry_note=None,
        **reset,
    )
    setattr(new, stage, artifact)
    # rewinding is the one move allowed from any phase
    new.phase = phase
    return new


class Pipeline:
    def __init__(
        self,
        cfg: PipelineConfig,
        client: ChatClient,
        schema: PlanSchema | Mapping[str, Any] | None = None,
        templates: Mapping[str, PromptTemplate] | None = None,
    ):
        self.cfg = cfg
        self.client = client
        self.schema = PlanSchema.from_dict(schema) if isinstance(schema, Mapping) else schema
        self.templates = templates or default_templates(cfg.extra_examples)

    def run(self, problem: ProblemInput) -> PlanResult:
        multi = self.cfg.multi_step
        domain = get_domain(problem.domain_id) if problem.domain_id in DOMAIN_IDS else None
        if domain is not None:
            multi = domain.kind == "multi_step"
            if self.schema is None:
                self.schema = domain.schema
        state = initial_state(problem, bool(multi))
        ctx = StageContext(self.client, self.templates, state.trace)
        while state.phase not in ("done", "failed"):
            ctx.loop = state.assess_loops + 1
            ctx.trace = state.trace
            try:
                state = self.step(state, ctx)
            except NetworkError as exc:
                state.fail("runtime_error", f"chat provider unreachable: {exc}")
        return self.result(state)

    def step(self, state: PipelineState, ctx: StageContext) -> PipelineState:
        cfg = self.cfg
        p = state.problem
        revise = None
        if state.revise is not None and state.revise[0] == state.phase:
            revise, state.revise = state.revise[1:], None
        try:
            if state.phase == "define":
                state.definition = run_definer(p, ctx, cfg.max_regen, revise)
                state.goto("formulate")
            elif state.phase == "formulate":
                state.formulation = run_formulator(p, state.definition, ctx, state.multi_step, cfg.max_regen, revise)
                state.goto("encode")
            elif state.phase == "encode":
                state.encoding = run_encoder_gen(p, state.definition, state.formulation, ctx, cfg.max_regen, revise)
                state.goto("solve")
            elif state.phase == "solve":
                self.solve(state, ctx)
                state.goto("format")
            elif state.phase == "format":
                self.format(state, ctx)
                state.goto("assess")
            elif state.phase == "assess":
                return self.assess(state, ctx)
        except BudgetExhausted as exc:
            state.fail("budget_exhausted", str(exc))
        finally:
            state.stage_calls = _count_calls(state.trace)
        return state

    def solve(self, state: PipelineState, ctx: StageContext) -> None:
        enc = state.encoding
        start = time.monotonic()
        horizon = None
        try:
            if enc.env.horizon is not None:
                try:
                    outcome, horizon = solve_bounded_horizon(
                        enc.program, enc.env, self.cfg.horizon_for_run(), self.cfg.unroll_cap, self.cfg.exactly_one
                    )
                except TMaxExceeded as exc:
                    outcome = SolveOutcome("unsat", detail=str(exc))
            else:
                problem = lower(enc.program, enc.env, cap=self.cfg.unroll_cap, exactly_one=self.cfg.exactly_one)
                outcome = solve(problem, self.cfg.solver_timeout)
        except LoweringError as exc:
            outcome = SolveOutcome("solver_error", detail=f"{type(exc).__name__}: {exc}")
        state.trace.append(StageRecord("solver", "check", ctx.loop, 1, time.monotonic() - start, detail=outcome.status))
        state.outcome, state.horizon, state.decoded = outcome, horizon, None
        if outcome.status == "sat":
            try:
                state.decoded = self.decode(outcome, state.multi_step)
                state.last_plan = state.decoded
                state.feedback = json.dumps(state.decoded)
            except (DecodeError, SchemaMismatch) as exc:
                state.outcome = SolveOutcome("solver_error", detail=f"decoding failed: {exc}")
                state.trace.append(StageRecord("solver", "issue", ctx.loop, 1, detail=str(exc)))
                state.feedback = f"runtime error: decoding failed: {exc}"
        elif outcome.status == "unsat":
            state.feedback = "cannot find the solution" + (f": {outcome.detail}" if outcome.detail else "")
        else:
            state.feedback = f"runtime error: {outcome.status}" + (f": {outcome.detail}" if outcome.detail else "")

    def decode(self, outcome: SolveOutcome, multi_step: bool) -> Any:
        schema = self.schema
        if outcome.problem is not None and outcome.problem.horizon is not None and (schema is None or schema.kind != "multi_step"):
            schema = MULTI_STEP_SCHEMA
        if schema is not None:
            return decode(outcome, schema)
        plan = {name: json_number(v) for name, v in sorted(outcome.model.items())}
        if outcome.objective_value is not None:
            plan["objective"] = json_number(outcome.objective_value)
        return plan

    def format(self, state: PipelineState, ctx: StageContext) -> None:
        # a formatter failure is recorded and left to the assessment of this loop
        status = state.outcome.status
        try:
            state.formatted = run_formatter(
                state.problem, status, state.feedback, state.decoded, self.schema, state.definition, ctx
            )
        except (ParseFailure, FormatterMismatch) as exc:
            state.formatted = None
            ctx.issue("formatter", 1, f"{type(exc).__name__}: {exc}")

    def assess(self, state: PipelineState, ctx: StageContext) -> PipelineState:
        feedback = state.feedback
        if state.formatted is not None and state.formatted.reasoning:
            feedback += f"\nCorrectness reasoning: {state.formatted.reasoning}"
        state.assess_loops += 1
        note, state.retry_note = state.retry_note, None
        try:
            report, artifact = run_assessor(
                state.problem, state.definition, state.formulation, state.encoding.source, feedback, ctx, note
            )
        except ParseFailure as exc:
            ctx.issue("assess", 1, str(exc))
            state.retry_note = (getattr(exc, "response", ""), str(exc))
            return self._next_loop(state, "assess")
        except InvalidModification as exc:
            ctx.issue("assess", 1, str(exc))
            state.assessments.append(exc.report)
            flagged = exc.report.first_incorrect()
            rewind = {"definition": "define", "formulation": "formulate", "encoding": "encode"}[flagged]
            if state.multi_step and rewind == "define":
                rewind = "formulate"
            state.revise = (rewind, self._previous_answer(state, rewind), self._reasoning(exc.report, flagged))
            return self._next_loop(state, rewind)
        state.assessments.append(report)
        if report.passed:
            status = {"sat": "plan", "unsat": "infeasible"}.get(state.outcome.status, "runtime_error")
            state.status = status
            state.detail = "" if status == "plan" else state.feedback
            state.goto("done")
            return state
        if state.assess_loops >= self.cfg.max_assess_loops:
            state.fail("budget_exhausted", f"assessment still failing after {state.assess_loops} loops")
            return state
        try:
            return resume(state, report.modified_step, artifact)
        except StageMismatch as exc:
            ctx.issue("assess", 1, str(exc))
            return self._next_loop(state, "formulate")

    @staticmethod
    def _previous_answer(state: PipelineState, phase: str) -> str:
        if phase == "define" and state.definition is not None:
            return state.definition.render()
        if phase == "formulate" and state.formulation is not None:
            return formulation_text(state.formulation)
        if phase == "encode" and state.encoding is not None:
            return f"```fpl\n{state.encoding.source}\n```"
        return ""

    @staticmethod
    def _reasoning(report: AssessmentReport, step: str) -> str:
        i = ("definition", "formulation", "encoding").index(step)
        return report.reasoning[i] if i < len(report.reasoning) else ""

    def _next_loop(self, state: PipelineState, phase: str) -> PipelineState:
        if state.assess_loops >= self.cfg.max_assess_loops:
            state.fail("budget_exhausted", f"assessment still failing after {state.assess_loops} loops")
        else:
            state.goto(phase)
        return state

    def result(self, state: PipelineState) -> PlanResult:
        plan = state.decoded if state.status == "plan" else None
        objective = None
        if plan is not None and state.outcome is not None and state.outcome.objective_value is not None:
            objective = json_number(state.outcome.objective_value)
        return PlanResult(
            status=state.status or "runtime_error",
            plan=plan,
            objective_value=objective,
            horizon=state.horizon if state.multi_step and plan is not None else None,
            stage_trace=tuple(state.trace),
            assessments=tuple(state.assessments),
            last_plan_attempt=state.last_plan,
            detail=state.detail,
        )


def _count_calls(trace: Sequence[StageRecord]) -> dict[str, int]:
    out: dict[str, int] = {}
    for rec in trace:
        if rec.kind == "chat":
            out[rec.stage] = out.get(rec.stage, 0) + 1
    return out


def make_client(cfg: PipelineConfig, domain_id: str | None = None) -> ChatClient:
    cassette = Cassette(cfg.cassette_path, cfg.cassette_mode)
    provider = None
    if cfg.cassette_mode != "replay":
        if cfg.provider == "reference":
            from .llm.reference import ReferenceResponder

            if domain_id is None:
                raise ValueError("the reference provider needs a bundled domain")
            provider = ReferenceResponder(get_domain(domain_id))
        elif cfg.provider == "openai":
            provider = OpenAICompatibleProvider(cfg.base_url)
        else:
            raise ValueError(f"unknown provider {cfg.provider!r}")
    return ChatClient(cassette, provider, cfg.model_id, cfg.temperature, cfg.max_tokens)


def solve_query(
    problem: ProblemInput,
    cfg: PipelineConfig = PipelineConfig(),
    client: ChatClient | None = None,
    schema: PlanSchema | Mapping[str, Any] | None = None,
) -> PlanResult:
    """Run the whole pipeline; every outcome is encoded in the result status.

    A cassette miss in replay mode is not an outcome of the query and
    propagates as CassetteMiss.
    """
    client = client or make_client(cfg, problem.domain_id)
    return Pipeline(cfg, client, schema).run(problem)
