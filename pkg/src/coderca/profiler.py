"""Method-level index over reconstructed paths and LLM-driven snippet retrieval."""

from __future__ import annotations

import logging
import re
from dataclasses import dataclass, field

from .codefacts.ir import CodeFacts
from .codefacts.source_parser import render_method
from .report import IssueReport

logger = logging.getLogger(__name__)

NO_DOC = "(no doc)"
DEFAULT_RETRIEVAL_CAP = 10

_FENCE_RE = re.compile(r"```[ \t]*([^\n`]*)\n(.*?)```", re.S)
_BULLET_RE = re.compile(r"^(?:[-*+]\s+|\d+[.)]\s+)")


@dataclass(frozen=True)
class CodeIndexEntry:
    signature: str
    doc_summary: str
    path_ids: tuple[int, ...]
    order_hint: int


@dataclass(frozen=True)
class RetrievalSelection:
    requested_signatures: tuple[str, ...]
    resolved: tuple[tuple[str, str, tuple[int, int]], ...]
    unresolved: tuple[str, ...]
    fallback: bool = False

    @property
    def signatures(self) -> list[str]:
        return [sig for sig, _, _ in self.resolved]

    def to_json(self) -> dict:
        return {
            "requested": list(self.requested_signatures),
            "resolved": [{"signature": s, "body": b, "line_span": list(span)} for s, b, span in self.resolved],
            "unresolved": list(self.unresolved),
            "fallback": self.fallback,
        }


def summarize_doc(doc: str | None) -> str:
    if not doc:
        return NO_DOC
    lines = [re.sub(r"^\s*\*\s?", "", ln).strip() for ln in doc.splitlines()]
    text = " ".join(ln for ln in lines if ln and not ln.startswith("@"))
    return text or NO_DOC


def build_index(paths, facts: CodeFacts) -> list[CodeIndexEntry]:
    """One entry per distinct method on the paths, ordered by earliest step then signature."""
    first: dict[str, int] = {}
    members: dict[str, list[int]] = {}
    for pid, path in enumerate(paths):
        for pos, step in enumerate(path.steps):
            sig = step.signature
            if sig not in facts.methods:
                continue
            first[sig] = min(first.get(sig, pos), pos)
            ids = members.setdefault(sig, [])
            if not ids or ids[-1] != pid:
                ids.append(pid)
    entries = [
        CodeIndexEntry(sig, summarize_doc(facts.methods[sig].doc_comment), tuple(members[sig]), first[sig])
        for sig in first
    ]
    entries.sort(key=lambda e: (e.order_hint, e.signature))
    return entries


def render_report(report: IssueReport) -> str:
    parts = [f"Title: {report.title}"]
    if report.system or report.version:
        parts.append(f"System: {report.system} {report.version}".rstrip())
    if report.description:
        parts.append("Description:\n" + report.description.strip())
    if report.log_lines:
        parts.append("Logs:\n" + "\n".join(report.log_lines))
    if report.stack_trace:
        parts.append("Stack trace:\n" + report.stack_trace.strip())
    return "\n".join(parts)


def retrieval_prompt(report: IssueReport, index) -> str:
    lines = ["## Issue report", render_report(report), "", "## Code snippet indexes"]
    lines.extend(f"{e.signature}: {e.doc_summary}" for e in index)
    lines += [
        "",
        "## Instruction",
        "Select the methods whose full code you need to review to explain this failure.",
        "Return their signatures exactly as listed, one per line, inside a fenced block:",
        "```signatures",
        "<signature>",
        "```",
    ]
    return "\n".join(lines) + "\n"


def normalize_signature(text: str) -> str:
    return re.sub(r"\s+", "", _BULLET_RE.sub("", text.strip()).strip("`"))


def parse_selection(raw: str) -> list[str] | None:
    """Signature lines from the reply's fenced block, or None if there is none.

    A block tagged ``signatures`` wins; otherwise the first untagged block.
    """
    blocks = _FENCE_RE.findall(raw)
    chosen = None
    for tag, body in blocks:
        if tag.strip().lower() == "signatures":
            chosen = body
            break
    if chosen is None:
        untagged = [body for tag, body in blocks if not tag.strip()]
        if not untagged:
            return None
        chosen = untagged[0]
    out: list[str] = []
    for line in chosen.splitlines():
        sig = normalize_signature(line)
        if sig and sig not in out:
            out.append(sig)
    return out


def retrieve_snippets(report: IssueReport, index, llm, cap: int = DEFAULT_RETRIEVAL_CAP,
                      facts: CodeFacts | None = None) -> RetrievalSelection:
    """Ask the model which indexed methods to read and return their bodies.

    Only signatures present in ``index`` are ever resolved. Without a fenced
    block in the reply the first ``cap`` entries by order hint are used.
    """
    index = list(index)
    by_sig = {e.signature: e for e in index}
    raw = llm.complete(retrieval_prompt(report, index), temperature=0.0)
    requested = parse_selection(raw)
    fallback = requested is None
    if fallback:
        logger.info("retrieval reply had no fenced block; falling back to order-hint selection")
        requested = [e.signature for e in sorted(index, key=lambda e: (e.order_hint, e.signature))[:cap]]
    resolved, unresolved = [], []
    for sig in requested:
        if sig in by_sig and len(resolved) < cap and (facts is None or sig in facts.methods):
            if facts is not None:
                m = facts.methods[sig]
                resolved.append((sig, render_method(m), tuple(m.line_span)))
            else:
                resolved.append((sig, "", (0, 0)))
        else:
            unresolved.append(sig)
    return RetrievalSelection(tuple(requested), tuple(resolved), tuple(unresolved), fallback)
