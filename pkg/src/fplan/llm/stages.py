"""The five chat-backed stages: prompt assembly, calls, and response parsing.

Parsers never raise anything but the typed stage errors below, whatever
text comes back.
"""

from __future__ import annotations

import json
import re
import time
from dataclasses import dataclass, field
from typing import Any, Callable, Mapping, Sequence

from ..fpl import FplSyntaxError, FplTypeError, SortEnv, parse, typecheck
from ..fpl import ast as A
from ..ir import (
    AssessmentReport,
    FormulationIR,
    ProblemDefinition,
    ProblemInput,
    StageRecord,
    ValidationIssue,
    validate_formulation,
)
from ..smt import PlanSchema
from .chat import ChatClient
from .prompts import PromptTemplate, default_templates

CANNOT_FIND = "CANNOT FIND SOLUTION"
RUNTIME_ERROR = "RUNTIME ERROR"
NO_DEFINITION = "(no definition step: the goal and constraints come from the action model)"


class StageError(Exception):
    def __init__(self, stage: str, message: str):
        super().__init__(message)
        self.stage = stage


class ParseFailure(StageError):
    pass


class JsonParseFailure(ParseFailure):
    pass


class ValidationFailure(StageError):
    def __init__(self, stage: str, issues: Sequence[ValidationIssue]):
        super().__init__(stage, "; ".join(str(i) for i in issues))
        self.issues = tuple(issues)


class BudgetExhausted(StageError):
    def __init__(self, stage: str, diagnostics: Sequence[str]):
        super().__init__(stage, f"{stage} failed {len(diagnostics)} times: {diagnostics[-1] if diagnostics else ''}")
        self.diagnostics = tuple(diagnostics)


class FormatterMismatch(StageError):
    pass


class InvalidModification(StageError):
    def __init__(self, stage: str, message: str, report: AssessmentReport):
        super().__init__(stage, message)
        self.report = report


# -- parsers -------------------------------------------------------------------


def _section(text: str, label: str) -> str | None:
    m = re.search(r"\[\[\s*" + label + r"\s*:(.*?)(?:\]\](?=\s*(?:\[\[|\Z))|(?=\[\[)|\Z)", text, re.S | re.I)
    return m.group(1).strip() if m else None


def _split_items(body: str) -> tuple[str, ...]:
    parts = re.split(r"\n|;", body)
    items = []
    for p in parts:
        p = re.sub(r"^\s*(?:[-*•]|\d+[.)])\s*", "", p).strip()
        if p:
            items.append(p)
    return tuple(items)


def parse_definition(text: str) -> ProblemDefinition:
    goal = _section(text, "GOAL")
    if goal is None:
        raise ParseFailure("definer", "response lacks the [[GOAL: ]] section")
    constraints = _section(text, r"Constraints(?!\s*Reasoning)")
    if constraints is None:
        raise ParseFailure("definer", "response lacks the [[Constraints: ]] section")
    variables = _section(text, r"Decision\s+Variables") or ""
    reasoning = _section(text, r"Constraints\s+Reasoning") or ""
    return ProblemDefinition(goal, _split_items(variables), reasoning, _split_items(constraints), raw=text.strip())


_FENCE_RE = re.compile(r"```[A-Za-z0-9_+-]*\s*\n(.*?)```", re.S)


def strip_fences(text: str) -> str:
    blocks = _FENCE_RE.findall(text)
    return max(blocks, key=len) if blocks else text


def loads_lenient(text: str) -> Any:
    """JSON with the slips chat models commonly make repaired."""
    body = strip_fences(text).strip()
    start = min((i for i in (body.find("{"), body.find("[")) if i >= 0), default=-1)
    if start < 0:
        raise ValueError("no JSON object found")
    closer = "}" if body[start] == "{" else "]"
    end = body.rfind(closer)
    if end < start:
        raise ValueError("unterminated JSON object")
    body = body[start : end + 1]
    try:
        return json.loads(body)
    except json.JSONDecodeError:
        pass
    fixed = re.sub(r"(:\s*)((?:math\.)?(?:ceil|floor)\([^\n\"]*?\))(\s*[,}\n])", lambda m: m.group(1) + json.dumps(m.group(2)) + m.group(3), body)
    fixed = re.sub(r",(\s*[}\]])", r"\1", fixed)
    fixed = re.sub(r"([}\]\"el0-9])(\s*\n\s*\")", r"\1,\2", fixed)
    fixed = re.sub(r"\bTrue\b", "true", re.sub(r"\bFalse\b", "false", re.sub(r"\bNone\b", "null", fixed)))
    return json.loads(fixed)


def parse_formulation(text: str, problem: ProblemInput) -> FormulationIR:
    try:
        data = loads_lenient(text)
    except (ValueError, RecursionError) as exc:
        raise JsonParseFailure("formulator", f"response is not JSON: {exc}") from None
    if not isinstance(data, Mapping):
        raise JsonParseFailure("formulator", "response JSON is not an object")
    try:
        ir = FormulationIR.from_dict(data)
    except (ValueError, TypeError, AttributeError) as exc:
        raise JsonParseFailure("formulator", str(exc)) from None
    issues = validate_formulation(ir, problem)
    if issues:
        raise ValidationFailure("formulator", issues)
    return ir


def extract_program(text: str) -> str:
    return strip_fences(text).strip() + "\n"


@dataclass(frozen=True)
class Encoding:
    source: str
    program: A.Program
    env: SortEnv

    @property
    def is_multi_step(self) -> bool:
        return self.env.horizon is not None


def compile_program(source: str, problem: ProblemInput) -> Encoding:
    """Parse and typecheck; FPL errors propagate with their positions."""
    prog = parse(source)
    env = typecheck(prog, problem.data_tables())
    return Encoding(source, prog, env)


# -- stage context -------------------------------------------------------------


@dataclass
class StageContext:
    """Chat access plus the trace shared by all stages of one run."""

    client: ChatClient
    templates: Mapping[str, PromptTemplate] = field(default_factory=default_templates)
    trace: list[StageRecord] = field(default_factory=list)
    loop: int = 1
    clock: Callable[[], float] = time.monotonic

    def call(self, stage: str, messages: Sequence[tuple[str, str]], attempt: int) -> str:
        request = self.client.request(messages)
        start = self.clock()
        response = self.client.chat(request, stage)
        self.trace.append(
            StageRecord(
                stage,
                "chat",
                self.loop,
                attempt,
                self.clock() - start,
                response.prompt_tokens,
                response.completion_tokens,
                request.fingerprint()[:16],
            )
        )
        return response.text

    def issue(self, stage: str, attempt: int, detail: str) -> None:
        self.trace.append(StageRecord(stage, "issue", self.loop, attempt, detail=detail))


def _correction(stage: str, error: str) -> str:
    what = {
        "definer": "Respond again using the [[GOAL: ]], [[Decision Variables: ]], [[Constraints Reasoning: ]] and [[Constraints: ]] sections.",
        "formulator": "Respond again with the corrected JSON description only.",
        "codegen": "Respond again with the corrected FPL program only, wrapped in ```fpl and ```.",
    }.get(stage, "Respond again in the required format.")
    return f"Your previous response could not be used:\n{error}\n{what}"


def revision_request(previous: str, reasoning: str) -> str:
    return (
        "An assessment of the full pipeline rated your previous response incorrect:\n"
        f"{reasoning}\nRespond again with a corrected version in the same format."
    )


def _regenerate(
    ctx: StageContext,
    stage: str,
    prompt: str,
    accept: Callable[[str], Any],
    max_attempts: int,
    revise: tuple[str, str] | None = None,
) -> Any:
    """Ask until ``accept`` takes the answer; ``revise`` is (previous answer, assessor reasoning)."""
    messages: list[tuple[str, str]] = [("user", prompt)]
    if revise is not None:
        messages += [("assistant", revise[0]), ("user", revision_request(*revise))]
    diagnostics: list[str] = []
    for attempt in range(1, max_attempts + 1):
        text = ctx.call(stage, messages, attempt)
        try:
            return accept(text)
        except (StageError, FplSyntaxError, FplTypeError) as exc:
            diag = exc.format() if isinstance(exc, FplTypeError) else str(exc)
            diagnostics.append(diag)
            ctx.issue(stage, attempt, diag)
            messages += [("assistant", text), ("user", _correction(stage, diag))]
    raise BudgetExhausted(stage, diagnostics)


# -- stages --------------------------------------------------------------------


def run_definer(
    problem: ProblemInput, ctx: StageContext, max_attempts: int = 5, revise: tuple[str, str] | None = None
) -> ProblemDefinition:
    prompt = ctx.templates["definer"].render(task=problem.task_description, info_api=problem.render_info_api())
    return _regenerate(ctx, "definer", prompt, parse_definition, max_attempts, revise)


def run_formulator(
    problem: ProblemInput,
    definition: ProblemDefinition | None,
    ctx: StageContext,
    multi_step: bool = False,
    max_attempts: int = 5,
    revise: tuple[str, str] | None = None,
) -> FormulationIR:
    if multi_step:
        prompt = ctx.templates["formulator_multi"].render(task=problem.task_description, question=problem.query)
    else:
        prompt = ctx.templates["formulator_single"].render(
            task=problem.task_description,
            question=problem.query,
            definer_response=definition.render() if definition else "",
            info_api=problem.render_info_api(),
        )
    return _regenerate(ctx, "formulator", prompt, lambda t: parse_formulation(t, problem), max_attempts, revise)


def formulation_text(ir: FormulationIR) -> str:
    return json.dumps(ir.to_dict(), indent=2)


def run_encoder_gen(
    problem: ProblemInput,
    definition: ProblemDefinition | None,
    ir: FormulationIR,
    ctx: StageContext,
    max_attempts: int = 5,
    revise: tuple[str, str] | None = None,
) -> Encoding:
    prompt = ctx.templates["encoder_gen"].render(
        task=problem.task_description,
        question=problem.query,
        definer_response=definition.render() if definition else "",
        info_api=problem.render_info_api(),
        formulator_response=formulation_text(ir),
    )
    return _regenerate(ctx, "codegen", prompt, lambda t: compile_program(extract_program(t), problem), max_attempts, revise)


def output_format(schema: PlanSchema | None) -> str:
    if schema is None:
        return "{}"
    return json.dumps({f["name"]: f"<{f['type']}>" for f in schema.fields}, indent=2)


@dataclass(frozen=True)
class FormattedResult:
    plan: Any
    reasoning: str
    sentinel: str | None = None


def _normalize(value: Any) -> Any:
    if isinstance(value, bool) or value is None:
        return value
    if isinstance(value, float) and value.is_integer():
        return int(value)
    if isinstance(value, str):
        return " ".join(value.replace("(", " ").replace(")", " ").replace(",", " ").split())
    if isinstance(value, Mapping):
        return {str(k): _normalize(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_normalize(v) for v in value]
    return value


def parse_formatted(text: str) -> FormattedResult:
    m = re.search(r"JSON\s*:(.*?)(?:Correctness\s+reasoning\s*:(.*))?$", text, re.S | re.I)
    if not m:
        raise ParseFailure("formatter", "response lacks the JSON: section")
    body, reasoning = m.group(1), (m.group(2) or "")
    reasoning = re.sub(r"\]\]\s*$", "", reasoning.strip()).strip()
    for sentinel in (CANNOT_FIND, RUNTIME_ERROR):
        if sentinel in body.upper():
            return FormattedResult(None, reasoning, sentinel)
    try:
        plan = loads_lenient(body)
    except (ValueError, RecursionError) as exc:
        raise ParseFailure("formatter", f"JSON section does not parse: {exc}") from None
    return FormattedResult(plan, reasoning)


def run_formatter(
    problem: ProblemInput,
    status: str,
    feedback: str,
    decoded: Any,
    schema: PlanSchema | None,
    definition: ProblemDefinition | None,
    ctx: StageContext,
) -> FormattedResult:
    """Ask for the formatted plan and commonsense check; cross-check the plan.

    ``status`` is the solver status; ``decoded`` is the deterministic plan
    (ignored unless the status is sat).
    """
    prompt = ctx.templates["formatter"].render(
        task=problem.task_description,
        question=problem.query,
        feedback=feedback,
        info_api=problem.render_info_api(),
        output_format=output_format(schema),
        definer_response=definition.render() if definition else NO_DEFINITION,
    )
    text = ctx.call("formatter", [("user", prompt)], 1)
    result = parse_formatted(text)
    expected = {"sat": None, "unsat": CANNOT_FIND}.get(status, RUNTIME_ERROR)
    if result.sentinel != expected:
        raise FormatterMismatch("formatter", f"formatter answered {result.sentinel or 'a plan'} for a {status} outcome")
    if status == "sat" and _normalize(result.plan) != _normalize(decoded):
        raise FormatterMismatch("formatter", "formatted plan differs from the decoded solver model")
    return result


# -- assessment ----------------------------------------------------------------

_STEP_STAGES = ("definition", "formulation", "encoding")


def _step_block(text: str, k: int) -> str | None:
    m = re.search(r"\[\[\s*Step\s*" + str(k) + r"\s*:(.*?)(?=\[\[\s*Step\s*\d\s*:|\Z)", text, re.S | re.I)
    return m.group(1) if m else None


def _nullish(s: str | None) -> bool:
    return s is None or s.strip().strip("`").strip().upper() in ("", "NULL", "NONE", "N/A")


def parse_assessment(text: str) -> tuple[tuple[int, int, int], tuple[str, str, str], tuple[str | None, ...]]:
    ratings, reasons, mods = [], [], []
    for k in (1, 2, 3):
        block = _step_block(text, k)
        if block is None:
            raise ParseFailure("assess", f"response lacks a [[Step {k}: ]] block")
        r = re.search(r"Rating\s*:\s*\**\s*([01])\b", block, re.I)
        if not r:
            raise ParseFailure("assess", f"step {k} has no binary rating")
        ratings.append(int(r.group(1)))
        why = re.search(r"Correctness\s+Reasoning\s*:(.*?)(?=Rating\s*:)", block, re.S | re.I)
        reasons.append(why.group(1).strip() if why else "")
        mod = re.search(r"Modified\s+Step\s*" + str(k) + r"[^:\n]*:(.*?)(?:\n\s*END\b|\]\]|\Z)", block, re.S | re.I)
        mods.append(None if mod is None or _nullish(mod.group(1)) else mod.group(1).strip())
    return tuple(ratings), tuple(reasons), tuple(mods)  # type: ignore[return-value]


def run_assessor(
    problem: ProblemInput,
    definition: ProblemDefinition | None,
    ir: FormulationIR,
    encoding_source: str,
    feedback: str,
    ctx: StageContext,
    retry_note: tuple[str, str] | None = None,
) -> tuple[AssessmentReport, Any]:
    """Rate the three steps and validate the replacement for the first 0.

    Returns the report and the validated replacement artifact (a
    ProblemDefinition, FormulationIR or Encoding), or None when all steps
    pass.  ``retry_note`` carries (previous response, parse error) so a
    repeated assessment is asked as a follow-up rather than verbatim.
    """
    prompt = ctx.templates["assessor"].render(
        task=problem.task_description,
        question=problem.query,
        info_api=problem.render_info_api(),
        definer_response=definition.render() if definition else NO_DEFINITION,
        formulator_response=formulation_text(ir),
        code_generator_response=encoding_source,
        feedback=feedback,
    )
    messages = [("user", prompt)]
    if retry_note:
        messages += [("assistant", retry_note[0]), ("user", _correction("assess", retry_note[1]))]
    text = ctx.call("assess", messages, 1)
    try:
        ratings, reasons, mods = parse_assessment(text)
    except ParseFailure as exc:
        exc.response = text  # type: ignore[attr-defined]
        raise
    if all(ratings):
        return AssessmentReport(ratings, reasons), None
    idx = ratings.index(0)
    step = _STEP_STAGES[idx]
    bare = AssessmentReport(ratings, reasons)
    mod = mods[idx]
    if mod is None:
        raise InvalidModification("assess", f"step {idx + 1} rated 0 without a modification", bare)
    try:
        if step == "definition":
            if definition is None:
                raise InvalidModification("assess", "multi-step runs have no definition step to modify", bare)
            artifact: Any = parse_definition(mod)
        elif step == "formulation":
            artifact = parse_formulation(mod, problem)
        else:
            artifact = compile_program(extract_program(mod), problem)
    except InvalidModification:
        raise
    except (StageError, FplSyntaxError, FplTypeError) as exc:
        raise InvalidModification("assess", f"modified step {idx + 1} is invalid: {exc}", bare) from None
    return AssessmentReport(ratings, reasons, mod, step), artifact
