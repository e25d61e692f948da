"""Offline responders that stand in for a chat model.

``ReferenceResponder`` answers each stage as a perfect model would, using a
bundled domain's reference program.  ``ScriptedResponder`` overrides chosen
calls so cassettes with failures, rejections and mismatches can be recorded.
"""

from __future__ import annotations

import dataclasses
import json
import math
import re
from typing import Any, Callable, Mapping, Sequence

from ..domains import Domain, QueryCase, StripsDomain
from ..fpl import ast as A
from ..fpl import parse, typecheck
from ..fpl.printer import expr_text, statement_text
from .chat import ChatRequest, ChatResponse
from .prompts import PromptTemplate, default_templates, stage_of_prompt
from .stages import CANNOT_FIND, RUNTIME_ERROR


def _words(text: str) -> int:
    return len(text.split())


def _names(node: Any) -> set[str]:
    out: set[str] = set()
    if isinstance(node, (A.Name, A.Index)):
        out.add(node.ident)
    if dataclasses.is_dataclass(node):
        for f in dataclasses.fields(node):
            out |= _names(getattr(node, f.name))
    elif isinstance(node, tuple):
        for item in node:
            out |= _names(item)
    return out


def _var(name, smt, count, source, value, requirement) -> dict:
    return {
        "name": name,
        "SMT_variable": smt,
        "number_of_variables": count,
        "data_source": source,
        "value": value,
        "specific_requirement": requirement,
    }


def definition_text(prog: A.Program) -> str:
    decls = [s for s in prog.statements if isinstance(s, A.VarDecl)]
    asserts = [statement_text(s).rstrip(";") for s in prog.statements if isinstance(s, A.Assert)]
    objective = next((s for s in prog.statements if isinstance(s, A.Objective)), None)
    goal = f"{objective.direction.capitalize()} {expr_text(objective.expr)}" if objective else "Find any feasible assignment"
    variables = "; ".join(f"{d.name}" + (f" for each {', '.join(d.index)}" if d.index else "") for d in decls)
    return (
        f"[[GOAL: {goal}]]\n"
        f"[[Decision Variables: {variables}]]\n"
        "[[Constraints Reasoning: Every decision variable is tied to the data tables and to the other variables "
        "by the constraints below, including non-negativity and integrality of quantities.]]\n"
        f"[[Constraints: {'; '.join(asserts)}]]"
    )


def single_step_formulation(prog: A.Program, sizes: Mapping[str, int], background: Mapping[str, Any]) -> dict:
    asserts = [s for s in prog.statements if isinstance(s, A.Assert)]
    objective = next((s for s in prog.statements if isinstance(s, A.Objective)), None)
    params = [s.name for s in prog.statements if isinstance(s, A.ParamDecl)]
    out: dict[str, dict] = {}
    for s in prog.statements:
        vid = f"variable_{len(out) + 1}"
        if isinstance(s, A.SetDecl):
            source = s.name if s.name in background else "query"
            out[vid] = _var(s.name, False, 1, source, f"index set {s.name}", None)
        elif isinstance(s, A.ParamDecl):
            source = s.name if s.name in background else "query"
            how = "table from the background data" if s.value is None else "table as changed by the query"
            out[vid] = _var(s.name, False, 1, source, how, None)
        elif isinstance(s, A.VarDecl):
            related = [a for a in asserts if s.name in _names(a.expr)]
            used = sorted({n for a in related for n in _names(a.expr)} & set(params))
            reqs = [statement_text(a).rstrip(";") for a in related]
            if objective is not None and s.name in _names(objective.expr):
                reqs.append(objective.direction)
            count = math.prod(sizes[i] for i in s.index) if s.index else 1
            out[vid] = _var(
                s.name,
                True,
                count,
                ", ".join(used) or "query",
                f"{s.sort} decision variable" + (f" per {', '.join(s.index)}" if s.index else ""),
                "; ".join(reqs) or None,
            )
    return out


def multi_step_formulation(prog: A.Program) -> dict:
    sections: dict[str, dict] = {k: {} for k in ("objects", "predicates", "actions", "update", "goal")}
    n = 0

    def next_id(prefix: str = "variable") -> str:
        nonlocal n
        n += 1
        return f"{prefix}_{n}"

    for s in prog.statements:
        if isinstance(s, A.SetDecl):
            sections["objects"][next_id()] = _var(s.name, False, 1, "query", f"objects of type {s.name}", None)
        elif isinstance(s, A.FluentDecl):
            keys = ", ".join((*s.index, "timestep"))
            sections["predicates"][next_id()] = _var(
                s.name, False, 1, "query", f"boolean variables for {s.name}: keys are ({keys})",
                "initialize timestep 0 from the query; atoms the query does not mention are false",
            )
        elif isinstance(s, A.ActionDecl):
            keys = ", ".join((*(b.set_name for b in s.params), "timestep"))
            sections["actions"][next_id()] = _var(
                s.name, False, 1, "query", f"boolean variables for action {s.name}: keys are ({keys})", None
            )
    for s in prog.statements:
        if isinstance(s, A.ActionDecl):
            text = statement_text(s).replace("\n", " ")
            sections["update"][next_id("step")] = _var(
                f"action {s.name} precondition and effect", None, None, "query",
                f"add constraints for {s.name}",
                f"for each timestep t until T: {text}",
            )
    sections["update"][next_id("step")] = _var(
        "all_actions", False, "list of all actions", "query", "all ground actions per timestep",
        "exactly one action per timestep",
    )
    sections["update"][next_id("step")] = _var(
        "unchanged predicates", None, None, "query", "predicates no action touches keep their value", None
    )
    goal = next((s for s in prog.statements if isinstance(s, A.GoalDecl)), None)
    goal_text = statement_text(goal).rstrip(";") if goal else "goal"
    sections["goal"][next_id("step")] = _var(None, None, None, None, None, f"assert at timestep T: {goal_text}")
    return sections


def _feedback(prompt: str) -> str:
    m = re.search(r"Execution feedback: (.*?)\nVariable or API:", prompt, re.S)
    return m.group(1).strip() if m else ""


class ReferenceResponder:
    """A model that always answers with the domain's reference solution."""

    def __init__(self, domain: Domain, templates: Mapping[str, PromptTemplate] | None = None):
        self.domain = domain
        self.templates = templates or default_templates()

    def case_for(self, prompt: str) -> QueryCase:
        matches = [c for c in self.domain.cases if c.query in prompt]
        if not matches:
            raise LookupError(f"{self.domain.id}: prompt matches no bundled query")
        return max(matches, key=lambda c: len(c.query))

    def stage_for(self, request: ChatRequest) -> str:
        stage = stage_of_prompt(request.messages[0][1], self.templates)
        if stage is None:
            raise LookupError("prompt matches no stage template")
        return stage

    def answer(self, request: ChatRequest) -> str:
        prompt = request.messages[0][1]
        stage = self.stage_for(request)
        if stage == "definer":
            # the definer sees the task but not the query
            return definition_text(self.domain.reference_ast)
        case = self.case_for(prompt)
        source = self.program_source(case)
        prog = parse(source)
        if stage in ("formulator_single", "formulator_multi"):
            if isinstance(self.domain, StripsDomain):
                data = multi_step_formulation(prog)
            else:
                env = typecheck(prog, self.domain.case_background(case))
                sizes = {k: len(v) for k, v in env.sets.items()}
                data = single_step_formulation(prog, sizes, self.domain.case_background(case))
            return json.dumps(data, indent=2)
        if stage == "encoder_gen":
            return f"```fpl\n{source}```"
        if stage == "formatter":
            return formatter_answer(_feedback(prompt), prog)
        return assessor_answer((1, 1, 1))

    def program_source(self, case: QueryCase) -> str:
        return self.domain.program_source(case)

    def __call__(self, request: ChatRequest) -> ChatResponse:
        text = self.answer(request)
        return ChatResponse(text, sum(_words(c) for _, c in request.messages), _words(text))


def formatter_answer(feedback: str, prog: A.Program | None = None, plan: Any = None) -> str:
    low = feedback.lower()
    if low.startswith("cannot find"):
        return f"[[\nJSON: {CANNOT_FIND}\nCorrectness reasoning: NULL\n]]"
    if low.startswith("runtime error"):
        return f"[[\nJSON: {RUNTIME_ERROR}\nCorrectness reasoning: NULL\n]]"
    if plan is None:
        plan = json.loads(feedback)
    checks = []
    if prog is not None:
        for s in prog.statements:
            if isinstance(s, A.Assert):
                checks.append(f"Yes, the plan satisfies {statement_text(s).rstrip(';')}.")
    checks.append("The plan is achievable and makes sense.")
    return f"[[\nJSON: {json.dumps(plan)}\nCorrectness reasoning: {' '.join(checks)}\n]]"


def assessor_answer(ratings: Sequence[int], modification: str | None = None) -> str:
    blocks = []
    first_zero = next((i for i, r in enumerate(ratings) if r == 0), None)
    for i, r in enumerate(ratings):
        k = i + 1
        why = "The step is consistent with the task, the query and the feedback." if r else "The step misses part of the query."
        how = "NULL" if r else "Rewrite the step so that it encodes the query."
        mod = modification if (i == first_zero and modification is not None) else "NULL"
        blocks.append(
            f"[[Step {k}: \nCorrectness Reasoning: {why}\nRating: {r}\nHow to mofify Reasoning: {how}\n"
            f"Modified Step {k}(no explanation):\n{mod}\nEND\n]]"
        )
    return "\n".join(blocks)


Override = Callable[[ChatRequest, str], str]


class ScriptedResponder:
    """Wraps a responder and replaces the n-th call of a stage.

    ``script`` maps a stage name (``definer``, ``formulator``, ``codegen``,
    ``formatter``, ``assess``) to a list whose n-th entry governs that
    stage's n-th call: None passes through, a string is returned verbatim
    and a callable gets (request, reference answer).
    """

    STAGE_KEYS = {
        "definer": "definer",
        "formulator_single": "formulator",
        "formulator_multi": "formulator",
        "encoder_gen": "codegen",
        "formatter": "formatter",
        "assessor": "assess",
    }

    def __init__(self, base: ReferenceResponder, script: Mapping[str, Sequence[str | Override | None]]):
        self.base = base
        self.script = {k: list(v) for k, v in script.items()}
        self.calls: dict[str, int] = {}

    def __call__(self, request: ChatRequest) -> ChatResponse:
        key = self.STAGE_KEYS[self.base.stage_for(request)]
        n = self.calls.get(key, 0)
        self.calls[key] = n + 1
        entries = self.script.get(key, [])
        entry = entries[n] if n < len(entries) else None
        if entry is None:
            return self.base(request)
        text = entry if isinstance(entry, str) else entry(request, self.base.answer(request))
        return ChatResponse(text, sum(_words(c) for _, c in request.messages), _words(text))


# -- canned faults ---------------------------------------------------------------


def broken_program(_request: ChatRequest, answer: str) -> str:
    """The reference program with a reference to an undeclared name."""
    return answer.replace("```fpl\n", "```fpl\nassert undeclared_quantity >= 0;\n", 1)


def revised_formulation(revision: int) -> Override:
    """Assessor answer rejecting the formulation with a lightly edited copy."""

    def make(request: ChatRequest, _answer: str) -> str:
        prompt = request.messages[0][1]
        m = re.search(r"\n2\) (\{.*?\n\})\n3\) ", prompt, re.S)
        data = json.loads(m.group(1)) if m else {}
        for body in _entries(data):
            if body.get("value"):
                body["value"] = f"{body['value']} (revision {revision})"
                break
        return assessor_answer((1, 0, 1), json.dumps(data, indent=2))

    return make


def _entries(data: dict) -> list[dict]:
    if all(isinstance(v, dict) and "name" not in v for v in data.values()) and data:
        return [b for sec in data.values() for b in sec.values()]
    return list(data.values())


def perturbed_plan(_request: ChatRequest, answer: str) -> str:
    """Formatter answer whose plan differs from the decoded model."""
    m = re.search(r"JSON: (.*)\nCorrectness reasoning:", answer, re.S)
    if not m:
        return answer
    try:
        plan = json.loads(m.group(1))
    except json.JSONDecodeError:
        return answer
    if isinstance(plan, dict):
        for k, v in plan.items():
            if isinstance(v, (int, float)) and not isinstance(v, bool):
                plan[k] = v + 1
                break
            if isinstance(v, list):
                plan[k] = list(reversed(v)) + ["noop"]
                break
    return answer.replace(m.group(1), json.dumps(plan), 1)


def reject_step(step: int, modification: str | None) -> Override:
    ratings = [1, 1, 1]
    ratings[step - 1] = 0
    return lambda _r, _a: assessor_answer(ratings, modification)


def reworded(note: str = "revised") -> Override:
    """The reference answer with a harmless textual change.

    Programs gain a comment line; JSON formulations gain a suffix on the
    first description value.
    """

    def make(_request: ChatRequest, answer: str) -> str:
        if "```fpl\n" in answer:
            return answer.replace("```fpl\n", f"```fpl\n# {note}\n", 1)
        try:
            data = json.loads(answer)
        except json.JSONDecodeError:
            return answer + f"\n{note}"
        for body in _entries(data):
            if body.get("value"):
                body["value"] = f"{body['value']} ({note})"
                break
        return json.dumps(data, indent=2)

    return make


GARBAGE = "I am not sure how to answer this."
