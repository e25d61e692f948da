"""Stage prompt templates and their rendering."""

from __future__ import annotations

import re
from dataclasses import dataclass
from importlib import resources
from typing import Mapping, Sequence

STAGES = ("definer", "formulator_single", "formulator_multi", "encoder_gen", "formatter", "assessor")
SLOTS = (
    "task",
    "question",
    "info_api",
    "definer_response",
    "formulator_response",
    "code_generator_response",
    "output_format",
    "feedback",
)
_SLOT_RE = re.compile(r"\{(" + "|".join(SLOTS) + r")\}")
# the line before which opt-in demonstrations are spliced into formulator prompts
_EXAMPLES_ANCHOR = "Now, based on the example"


class MissingSlot(KeyError):
    pass


def load_template_text(stage: str) -> str:
    if stage not in STAGES:
        raise ValueError(f"unknown stage {stage!r}")
    return resources.files("fplan.llm").joinpath("templates").joinpath(f"{stage}.txt").read_text(encoding="utf-8")


@dataclass(frozen=True)
class PromptTemplate:
    stage: str
    body: str
    extra_examples: tuple[tuple[str, str], ...] = ()

    @classmethod
    def load(cls, stage: str, extra_examples: Sequence[tuple[str, str]] = ()) -> "PromptTemplate":
        return cls(stage, load_template_text(stage), tuple(extra_examples))

    @property
    def slots(self) -> list[str]:
        return sorted(set(_SLOT_RE.findall(self.body)))

    def skeleton(self) -> list[str]:
        """Fixed lines of the template: those without any slot."""
        return [line for line in self.body.splitlines() if line.strip() and not _SLOT_RE.search(line)]

    def render(self, **values: str) -> str:
        missing = [s for s in self.slots if s not in values]
        if missing:
            raise MissingSlot(f"{self.stage} prompt needs {', '.join(missing)}")
        body = self.body
        if self.extra_examples:
            body = _splice_examples(body, self.extra_examples)
        return _SLOT_RE.sub(lambda m: str(values[m.group(1)]), body)


def _splice_examples(body: str, examples: Sequence[tuple[str, str]]) -> str:
    block = "".join(
        f"Additional example task {i}:\n{task.strip()}\nJSON description:\n{answer.strip()}\n\n"
        for i, (task, answer) in enumerate(examples, 1)
    )
    at = body.find(_EXAMPLES_ANCHOR)
    return body + "\n" + block if at < 0 else body[:at] + block + body[at:]


def default_templates(extra_examples: Sequence[tuple[str, str]] = ()) -> dict[str, PromptTemplate]:
    out = {s: PromptTemplate.load(s) for s in STAGES}
    if extra_examples:
        for s in ("formulator_single", "formulator_multi"):
            out[s] = PromptTemplate.load(s, extra_examples)
    return out


def stage_of_prompt(text: str, templates: Mapping[str, PromptTemplate] | None = None) -> str | None:
    """Which stage template produced ``text`` (matched on its first fixed line)."""
    templates = templates or default_templates()
    for stage, tpl in templates.items():
        first = tpl.body.splitlines()[0]
        if text.startswith(first.split("{", 1)[0]) and all(line in text for line in tpl.skeleton()[:3]):
            return stage
    return None
