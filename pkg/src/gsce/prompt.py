"""Prompt composition from guidelines, skill APIs, constraints and examples.

The four method presets differ only in which optional sections they switch
on::

    preset        constraints  examples
    base               -           -
    constraints        x           -
    examples           -           x
    gsce               x           x

Guidelines and skill API docs are always present.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from gsce.skillscript import ParseError, parse

ASSETS = Path(__file__).parent / "assets"
DEFAULT_K = 3

SECTION_TITLES = {
    "guidelines": "## Guidelines",
    "skill_apis": "## Skill APIs",
    "constraints": "## Constraints",
    "examples": "## Examples",
}
EXAMPLE_HEADER = "### Example {n}"
CODE_FENCE = "```skillscript"


class PromptError(ValueError):
    pass


class LibraryError(PromptError):
    pass


@dataclass(frozen=True)
class MethodConfig:
    method: str
    include_constraints: bool
    include_examples: bool
    k: int = 0
    cot: bool = False
    constraint_impl: bool = False

    def __post_init__(self):
        if self.k < 0:
            raise PromptError("k must be non-negative")
        if self.k > 0 and not self.include_examples:
            raise PromptError(f"k={self.k} requires the examples section (method {self.method!r})")


_PRESETS = {
    "base": dict(include_constraints=False, include_examples=False),
    "constraints": dict(include_constraints=True, include_examples=False),
    "examples": dict(include_constraints=False, include_examples=True, k=DEFAULT_K, cot=False, constraint_impl=True),
    "gsce": dict(include_constraints=True, include_examples=True, k=DEFAULT_K, cot=True, constraint_impl=True),
}
METHODS = tuple(_PRESETS)


def preset(
    method: str,
    k: int | None = None,
    cot: bool | None = None,
    constraint_impl: bool | None = None,
) -> MethodConfig:
    """A :class:`MethodConfig` for a named method, with optional overrides.

    ``examples`` defaults to plain solutions and ``gsce`` to solutions with
    step-by-step comments. Overriding ``cot``/``constraint_impl`` on a preset
    without examples has no effect and is normalized away.
    """
    if method not in _PRESETS:
        raise PromptError(f"unknown method {method!r}; expected one of {', '.join(METHODS)}")
    opts = dict(_PRESETS[method])
    if opts["include_examples"]:
        if k is not None:
            opts["k"] = k
        if cot is not None:
            opts["cot"] = cot
        if constraint_impl is not None:
            opts["constraint_impl"] = constraint_impl
    elif k:
        raise PromptError(f"method {method!r} has no examples section; k must be 0")
    return MethodConfig(method=method, **opts)


# -- example library --------------------------------------------------------


@dataclass(frozen=True)
class ExampleEntry:
    id: str
    query: str
    solution_cot: str
    solution_plain: str
    solution_no_constraint: str
    constraints_covered: tuple[str, ...] = ()

    def solution(self, cot: bool, constraint_impl: bool) -> str:
        code = self.solution_cot if constraint_impl else self.solution_no_constraint
        if not cot:
            code = self.solution_plain if constraint_impl else strip_comment_lines(code)
        return code.strip("\n")


_ENTRY_FIELDS = ("id", "query", "solution_cot", "solution_plain", "solution_no_constraint")


def _entry_from_json(d: dict, index: int) -> ExampleEntry:
    if not isinstance(d, dict):
        raise LibraryError(f"example #{index} is not an object")
    missing = [f for f in _ENTRY_FIELDS if not isinstance(d.get(f), str)]
    if missing:
        raise LibraryError(f"example {d.get('id', '#' + str(index))}: missing or non-text field(s) {missing}")
    covered = d.get("constraints_covered", [])
    if not isinstance(covered, list) or not all(isinstance(c, str) for c in covered):
        raise LibraryError(f"example {d['id']}: constraints_covered must be a list of strings")
    entry = ExampleEntry(*(d[f] for f in _ENTRY_FIELDS), constraints_covered=tuple(covered))
    programs = {}
    for variant in ("solution_cot", "solution_plain", "solution_no_constraint"):
        try:
            programs[variant] = parse(getattr(entry, variant))
        except ParseError as exc:
            raise LibraryError(f"example {entry.id}: {variant} does not parse: {exc}") from None
    if programs["solution_cot"] != programs["solution_plain"]:
        raise LibraryError(f"example {entry.id}: solution_cot and solution_plain differ beyond comments")
    return entry


def load_example_library(path: str | Path | None = None) -> list[ExampleEntry]:
    """Load an example library (JSON). An empty file or empty list yields ``[]``."""
    path = Path(path) if path is not None else ASSETS / "examples.json"
    text = path.read_text(encoding="utf-8")
    if not text.strip():
        return []
    try:
        data = json.loads(text)
    except json.JSONDecodeError as exc:
        raise LibraryError(f"{path}: invalid JSON: {exc}") from None
    items = data.get("examples") if isinstance(data, dict) else data
    if not isinstance(items, list):
        raise LibraryError(f"{path}: expected a list of examples")
    entries = [_entry_from_json(d, i) for i, d in enumerate(items)]
    ids = [e.id for e in entries]
    if len(set(ids)) != len(ids):
        raise LibraryError(f"{path}: duplicate example ids")
    return entries


def validate_library(
    library: Sequence[ExampleEntry], constraint_ids: Sequence[str], k: int = DEFAULT_K
) -> None:
    """Check that the first ``k`` examples demonstrate every constraint id."""
    covered = {c for e in library[:k] for c in e.constraints_covered}
    missing = [c for c in constraint_ids if c not in covered]
    if missing:
        raise LibraryError(f"constraints not covered by the first {k} examples: {', '.join(missing)}")


# -- texts ------------------------------------------------------------------


_CONSTRAINT_ID_RE = re.compile(r"^\s*-\s*\[([A-Za-z0-9_.-]+)\]", re.MULTILINE)


def constraint_ids(constraints_text: str) -> list[str]:
    """Identifiers written as ``- [id] ...`` bullets in the constraints text."""
    return _CONSTRAINT_ID_RE.findall(constraints_text)


@dataclass(frozen=True)
class PromptTexts:
    guidelines: str
    skill_apis: str
    constraints: str

    @property
    def constraint_ids(self) -> list[str]:
        return constraint_ids(self.constraints)


def load_texts(directory: str | Path | None = None) -> PromptTexts:
    d = Path(directory) if directory is not None else ASSETS
    read = lambda name: (d / name).read_text(encoding="utf-8").strip()  # noqa: E731
    return PromptTexts(read("guidelines.md"), read("skill_apis.md"), read("constraints.md"))


def strip_comment_lines(text: str) -> str:
    return "\n".join(line for line in text.split("\n") if not line.lstrip().startswith("#"))


# -- composition ------------------------------------------------------------


@dataclass(frozen=True)
class PromptBundle:
    system_text: str
    user_text: str
    section_manifest: dict = field(default_factory=dict)

    def messages(self) -> list[dict]:
        return [
            {"role": "system", "content": self.system_text},
            {"role": "user", "content": self.user_text},
        ]


def render_example(n: int, entry: ExampleEntry, cot: bool, constraint_impl: bool) -> str:
    code = entry.solution(cot, constraint_impl)
    return f"{EXAMPLE_HEADER.format(n=n)}\nQuery: {entry.query}\nAnswer:\n{CODE_FENCE}\n{code}\n```"


def compose(
    config: MethodConfig,
    library: Sequence[ExampleEntry],
    guidelines_text: str,
    api_docs_text: str,
    constraints_text: str,
    query: str,
) -> PromptBundle:
    if config.k > len(library):
        raise PromptError(f"k={config.k} exceeds the example library size ({len(library)})")
    parts = [
        f"{SECTION_TITLES['guidelines']}\n{guidelines_text.strip()}",
        f"{SECTION_TITLES['skill_apis']}\n{api_docs_text.strip()}",
    ]
    if config.include_constraints:
        parts.append(f"{SECTION_TITLES['constraints']}\n{constraints_text.strip()}")
    if config.include_examples and config.k > 0:
        blocks = [
            render_example(n, e, config.cot, config.constraint_impl)
            for n, e in enumerate(library[: config.k], start=1)
        ]
        parts.append(SECTION_TITLES["examples"] + "\n" + "\n\n".join(blocks))
    manifest = {
        "method": config.method,
        "guidelines": True,
        "skill_apis": True,
        "constraints": config.include_constraints,
        "examples": config.include_examples and config.k > 0,
        "k": config.k,
        "cot": config.cot,
        "constraint_impl": config.constraint_impl,
    }
    return PromptBundle("\n\n".join(parts) + "\n", query, manifest)


def compose_default(config: MethodConfig, query: str, library=None, texts: PromptTexts | None = None) -> PromptBundle:
    """:func:`compose` with the shipped texts and example library."""
    texts = texts or load_texts()
    library = load_example_library() if library is None else library
    return compose(config, library, texts.guidelines, texts.skill_apis, texts.constraints, query)
