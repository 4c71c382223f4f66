"""Diagnosis prompt layout and the parser for the model's reply."""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field

from ..profiler import RetrievalSelection, render_report
from ..report import HistoricalExample, IssueReport

CHARS_PER_TOKEN = 4
DEFAULT_TOKEN_BUDGET = 24000
DEFAULT_RANKED_K = 5

PRIMARY_START = "PRIMARY SET"
PRIMARY_END = "END PRIMARY SET"


def estimate_tokens(text: str) -> int:
    return math.ceil(len(text) / CHARS_PER_TOKEN)


@dataclass(frozen=True)
class PromptBuild:
    text: str
    snippets_used: tuple[str, ...]
    examples_used: tuple[str, ...]
    dropped_snippets: tuple[str, ...] = ()
    dropped_examples: tuple[str, ...] = ()
    over_budget: bool = False

    @property
    def tokens(self) -> int:
        return estimate_tokens(self.text)


def _instructions(k: int) -> str:
    return "\n".join([
        "## Task",
        "Using the issue report, the execution paths, the code and the historical examples above:",
        "1. Summarize the root cause of the failure for the maintainers who will fix it.",
        f"2. List the {k} components most likely responsible, most likely first, one per line.",
        f"   Enclose the set of components you consider the actual root cause between '{PRIMARY_START}'",
        f"   and '{PRIMARY_END}' lines at the top of the list.",
        "Answer with exactly these two fenced sections:",
        "```SUMMARY",
        "<root cause summary>",
        "```",
        "```COMPONENTS",
        PRIMARY_START,
        "<component>",
        PRIMARY_END,
        "<component>",
        "```",
    ])


def _render(report, paths, snippets, examples, k) -> str:
    out = ["## Issue report", render_report(report), "", "## Reconstructed execution paths"]
    if paths:
        out.extend(f"{i}. {p.render()}" for i, p in enumerate(paths, 1))
    else:
        out.append("(no execution paths reconstructed)")
    out += ["", "## Retrieved code snippets"]
    if snippets:
        for sig, body, span in snippets:
            out.append(f"### {sig} (lines {span[0]}-{span[1]})")
            out.append(body)
    else:
        out.append("(no code snippets retrieved)")
    out += ["", "## Historical examples"]
    if examples:
        for i, ex in enumerate(examples, 1):
            r = ex.report
            out.append(f"### Example {i}: {r.id}")
            out.append(f"Title: {r.title}")
            if r.description:
                out.append("Description:\n" + r.description.strip())
            out.append("Root cause: " + ex.root_cause_summary.strip())
            out.append("Components: " + ", ".join(ex.components))
    else:
        out.append("(no historical examples)")
    out += ["", _instructions(k)]
    return "\n".join(out) + "\n"


def assemble_prompt(report: IssueReport, paths, selection: RetrievalSelection | None, examples,
                    token_budget: int = DEFAULT_TOKEN_BUDGET, order_hints: dict[str, int] | None = None,
                    k: int = DEFAULT_RANKED_K) -> PromptBuild:
    """Lay out report, paths, code, examples and the task, fitting ``token_budget``.

    Over budget, method bodies go first (latest in path order first), then
    examples beyond the first. The report itself is never dropped.
    """
    snippets = list(selection.resolved) if selection is not None else []
    examples = list(examples)
    hints = order_hints or {}
    position = {sig: i for i, (sig, _, _) in enumerate(snippets)}
    drop_order = sorted(snippets, key=lambda s: (hints.get(s[0], position[s[0]]), position[s[0]]), reverse=True)
    dropped_snippets: list[str] = []
    dropped_examples: list[str] = []
    text = _render(report, paths, snippets, examples, k)
    while estimate_tokens(text) > token_budget:
        if drop_order:
            victim = drop_order.pop(0)
            snippets.remove(victim)
            dropped_snippets.append(victim[0])
        elif len(examples) > 1:
            dropped_examples.append(examples.pop().id)
        else:
            break
        text = _render(report, paths, snippets, examples, k)
    return PromptBuild(
        text,
        tuple(s[0] for s in snippets),
        tuple(ex.id for ex in examples),
        tuple(dropped_snippets),
        tuple(dropped_examples),
        estimate_tokens(text) > token_budget,
    )


# -- reply parsing ----------------------------------------------------------------------


@dataclass
class Diagnosis:
    summary: str
    ranked_components: tuple[str, ...] = ()
    primary_components: tuple[str, ...] = ()
    raw_model_output: str = ""
    provenance: dict = field(default_factory=dict)
    flags: tuple[str, ...] = ()
    issue_id: str = ""
    timings: dict = field(default_factory=dict, compare=False, repr=False)

    @property
    def flagged(self) -> bool:
        return bool(self.flags)

    def to_json(self) -> dict:
        return {
            "issue_id": self.issue_id,
            "summary": self.summary,
            "ranked_components": list(self.ranked_components),
            "primary_components": list(self.primary_components),
            "flags": list(self.flags),
            "provenance": self.provenance,
            "raw_model_output": self.raw_model_output,
        }

    @classmethod
    def from_json(cls, d: dict) -> "Diagnosis":
        return cls(d.get("summary", ""), tuple(d.get("ranked_components", [])),
                   tuple(d.get("primary_components", [])), d.get("raw_model_output", ""),
                   dict(d.get("provenance", {})), tuple(d.get("flags", [])), d.get("issue_id", ""))


def _section(raw: str, name: str) -> str | None:
    m = re.search(rf"```[ \t]*{name}[ \t]*\n(.*?)```", raw, re.S | re.I)
    return m.group(1) if m else None


def _clean(line: str) -> str:
    line = re.sub(r"^(?:[-*+]\s+|\d+[.)]\s+)", "", line.strip())
    return line.strip().strip("`").strip()


def _marker(line: str) -> str | None:
    key = re.sub(r"[^a-z ]", "", line.lower()).strip()
    key = re.sub(r"\s+", " ", key)
    if key == "end primary set":
        return "end"
    if key == "primary set":
        return "start"
    return None


def _dedupe(items) -> list[str]:
    seen, out = set(), []
    for it in items:
        key = " ".join(it.lower().split())
        if key not in seen:
            seen.add(key)
            out.append(it)
    return out


def parse_diagnosis(raw: str, k: int = DEFAULT_RANKED_K) -> Diagnosis:
    """Read the SUMMARY and COMPONENTS sections of a completion.

    A missing section never raises: the diagnosis is flagged instead, with
    the raw text as summary and/or no components.
    """
    flags = []
    summary = _section(raw, "SUMMARY")
    if summary is None:
        flags.append("malformed_output:SUMMARY")
        summary = raw
    summary = summary.strip()
    block = _section(raw, "COMPONENTS")
    ranked: list[str] = []
    primary: list[str] = []
    if block is None:
        flags.append("malformed_output:COMPONENTS")
    else:
        state = "before"
        saw_marker = False
        for line in block.splitlines():
            mark = _marker(line)
            if mark == "start" and state == "before":
                state, saw_marker = "in", True
                continue
            if mark == "end":
                state = "after"
                continue
            name = _clean(line)
            if not name:
                if state == "in":
                    state = "after"
                continue
            ranked.append(name)
            if state == "in":
                primary.append(name)
        ranked = _dedupe(ranked)
        primary = _dedupe(primary)
        if not saw_marker and ranked:
            primary = ranked[:1]
        if not ranked:
            flags.append("malformed_output:COMPONENTS")
    return Diagnosis(summary, tuple(ranked[:k]), tuple(primary), raw, {}, tuple(flags))
