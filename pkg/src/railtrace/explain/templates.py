"""Structured prompt templates with [[ ## field ## ]] markers.

The rendered layout is frozen: a system message listing input and output
fields, a structure demonstration ending in the completed marker, and the
objective; the user message carries the input values and the instruction to
respond field by field. Completions are parsed back by marker name.
"""
from __future__ import annotations

import re
from dataclasses import dataclass, field

COMPLETED_MARKER = "[[ ## completed ## ]]"
REASONING_FIELD_DESC = "Think step by step in order to produce the output fields."

_MARKER_RE = re.compile(r"\[\[ ## (\w+) ## \]\]")


class TemplateError(ValueError):
    pass


@dataclass(frozen=True)
class TemplateField:
    name: str
    desc: str = ""


@dataclass
class PromptTemplate:
    task_description: str
    input_fields: list[TemplateField]
    output_fields: list[TemplateField] = field(default_factory=list)

    def __post_init__(self):
        names = [f.name for f in self.input_fields + self.output_fields]
        if len(set(names)) != len(names):
            raise TemplateError("field names must be unique")
        for name in names:
            if not re.fullmatch(r"\w+", name):
                raise TemplateError(f"invalid field name '{name}'")

    @property
    def output_names(self) -> list[str]:
        return [f.name for f in self.output_fields]


def make_template(task_description: str, inputs: list[tuple[str, str]], outputs: list[tuple[str, str]]) -> PromptTemplate:
    """Template whose output fields start with a chain-of-thought field."""
    return PromptTemplate(
        task_description=task_description,
        input_fields=[TemplateField(n, d) for n, d in inputs],
        output_fields=[TemplateField("reasoning", REASONING_FIELD_DESC)]
        + [TemplateField(n, d) for n, d in outputs],
    )


def _field_list(fields: list[TemplateField]) -> str:
    lines = []
    for i, f in enumerate(fields, 1):
        suffix = f": {f.desc}" if f.desc else ""
        lines.append(f"{i}. `{f.name}` (str){suffix}")
    return "\n".join(lines)


def render_prompt(template: PromptTemplate, values: dict[str, str]) -> tuple[str, str]:
    """System and user texts for one completion request."""
    missing = [f.name for f in template.input_fields if f.name not in values]
    if missing:
        raise TemplateError(f"missing value(s) for input field(s): {', '.join(missing)}")

    structure = "".join(
        f"[[ ## {f.name} ## ]]\n{{{f.name}}}\n\n" for f in template.input_fields
    )
    task = "\n".join(" " * 8 + line for line in template.task_description.splitlines())
    system = (
        "Your input fields are:\n"
        + _field_list(template.input_fields)
        + "\n\nYour output fields are:\n"
        + _field_list(template.output_fields)
        + "\n\nAll interactions will be structured in the following way, with the appropriate values filled in.\n\n"
        + structure
        + f"\n{COMPLETED_MARKER}\n\n"
        + "In adhering to this structure, your objective is: \n"
        + task
    )

    blocks = "".join(
        f"[[ ## {f.name} ## ]]\n{values[f.name]}\n\n" for f in template.input_fields
    )
    out_markers = [f"`[[ ## {f.name} ## ]]`" for f in template.output_fields]
    respond = (
        "Respond with the corresponding output fields, starting with the field "
        + out_markers[0]
        + "".join(f", then {m}" for m in out_markers[1:])
        + ", and then ending with the marker for `[[ ## completed ## ]]`."
    )
    return system, blocks + respond


def parse_fields(completion_text: str, expected_output_fields: list[str]) -> dict[str, str]:
    """Extract field contents between markers; requires the completed marker."""
    markers = list(_MARKER_RE.finditer(completion_text))
    if not any(m.group(1) == "completed" for m in markers):
        raise TemplateError("incomplete completion: missing completed marker")
    found: dict[str, str] = {}
    for i, m in enumerate(markers):
        name = m.group(1)
        if name == "completed":
            continue
        end = markers[i + 1].start() if i + 1 < len(markers) else len(completion_text)
        found[name] = completion_text[m.end():end].strip()
    missing = [n for n in expected_output_fields if n not in found]
    if missing:
        raise TemplateError(f"completion missing output field(s): {', '.join(missing)}")
    return {n: found[n] for n in expected_output_fields}
