"""Map an issue report's log lines and stack frames to source code points."""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from ..codefacts.ir import CodeFacts
from ..report import IssueReport
from .matching import LogLineParser, TemplateTree, match_log

_FRAME_RE = re.compile(
    r"^\s*at\s+(?P<qual>[\w$.<>]+)\.(?P<method>[\w$<>]+)\((?P<loc>[^)]*)\)\s*$"
)


@dataclass(frozen=True)
class StackFrame:
    class_name: str
    method: str
    file: str | None
    line: int | None
    raw: str = ""


def parse_stack_trace(text: str) -> list[StackFrame]:
    """Frames of a JVM-style trace in printed order; other lines are ignored."""
    frames = []
    for raw in (text or "").splitlines():
        m = _FRAME_RE.match(raw)
        if m is None:
            continue
        loc = m.group("loc")
        file, line = None, None
        if ":" in loc:
            file, _, num = loc.rpartition(":")
            line = int(num) if num.isdigit() else None
        elif loc and loc not in ("Native Method", "Unknown Source"):
            file = loc
        frames.append(StackFrame(m.group("qual"), m.group("method"), file, line, raw.strip()))
    return frames


@dataclass(frozen=True)
class CodePoint:
    method_signature: str
    line: int
    source: str  # "log" | "stack_frame"
    branch_path: tuple[tuple[int, bool], ...] = ()
    evidence: str = ""

    def to_json(self) -> dict:
        return {
            "method": self.method_signature,
            "line": self.line,
            "source": self.source,
            "branch_path": [[i, t] for i, t in self.branch_path],
            "evidence": self.evidence,
        }

    @classmethod
    def from_json(cls, d: dict) -> "CodePoint":
        return cls(d["method"], int(d["line"]), d["source"],
                   tuple((int(i), bool(t)) for i, t in d.get("branch_path", [])), d.get("evidence", ""))


@dataclass
class Attribution:
    points: list[CodePoint] = field(default_factory=list)
    unmatched_logs: list[str] = field(default_factory=list)
    unresolved_frames: list[str] = field(default_factory=list)

    def to_json(self) -> dict:
        return {
            "points": [p.to_json() for p in self.points],
            "unmatched": list(self.unmatched_logs),
            "unresolved_frames": list(self.unresolved_frames),
        }

    @classmethod
    def from_json(cls, d: dict) -> "Attribution":
        return cls([CodePoint.from_json(p) for p in d.get("points", [])], list(d.get("unmatched", [])),
                   list(d.get("unresolved_frames", [])))


def resolve_frame(facts: CodeFacts, frame: StackFrame) -> CodePoint | None:
    candidates = facts.method_by_class_and_name(frame.class_name, frame.method)
    if frame.line is not None:
        hits = [m for m in candidates if m.line_span[0] <= frame.line <= m.line_span[1]]
        if hits:
            return CodePoint(hits[0].signature, frame.line, "stack_frame", (), frame.raw)
        return None
    if len(candidates) == 1:
        m = candidates[0]
        return CodePoint(m.signature, m.line_span[0], "stack_frame", (), frame.raw)
    return None


def attribute_report(facts: CodeFacts, tree: TemplateTree, report: IssueReport,
                     line_parser: LogLineParser | None = None) -> Attribution:
    """Code points for a report: matched log lines first, then resolvable stack frames.

    Frames are emitted outermost-first so consecutive points follow call order.
    """
    line_parser = line_parser or LogLineParser()
    result = Attribution()
    for raw in report.log_lines:
        if not raw.strip():
            continue
        msg = line_parser.parse(raw)
        match = match_log(tree, msg)
        if match is None:
            result.unmatched_logs.append(raw)
            continue
        sig, line = match.code_point
        result.points.append(CodePoint(sig, line, "log", match.template.branch_path, raw))
    for frame in reversed(parse_stack_trace(report.stack_trace)):
        point = resolve_frame(facts, frame)
        if point is None:
            result.unresolved_frames.append(frame.raw)
        else:
            result.points.append(point)
    return result
