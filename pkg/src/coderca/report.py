"""Issue reports, labeled historical issues and the corpus file format."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any


@dataclass(frozen=True)
class IssueReport:
    id: str
    title: str
    system: str = ""
    version: str = ""
    description: str = ""
    log_lines: tuple[str, ...] = ()
    stack_trace: str = ""
    meta: dict[str, Any] = field(default_factory=dict, compare=True, hash=False)

    def __post_init__(self):
        if not self.title or not self.title.strip():
            raise ValueError(f"issue {self.id!r} has an empty title")

    @classmethod
    def from_json(cls, d: dict) -> "IssueReport":
        logs = d.get("logs", d.get("log_lines", []))
        if isinstance(logs, str):
            logs = logs.splitlines()
        return cls(
            id=str(d["id"]),
            title=d["title"],
            system=d.get("system", ""),
            version=d.get("version", ""),
            description=d.get("description", ""),
            log_lines=tuple(logs),
            stack_trace=d.get("stack_trace", "") or "",
            meta=dict(d.get("meta", {})),
        )

    def to_json(self) -> dict:
        return {
            "id": self.id,
            "system": self.system,
            "version": self.version,
            "title": self.title,
            "description": self.description,
            "logs": list(self.log_lines),
            "stack_trace": self.stack_trace,
            "meta": self.meta,
        }


@dataclass(frozen=True)
class GroundTruth:
    issue_id: str
    summary: str
    components: tuple[str, ...]
    system: str = ""

    def __post_init__(self):
        if not 1 <= len(self.components) <= 2:
            raise ValueError(f"ground truth for {self.issue_id!r} must name one or two components")


@dataclass(frozen=True)
class HistoricalExample:
    report: IssueReport
    root_cause_summary: str
    components: tuple[str, ...]

    def __post_init__(self):
        if not self.components:
            raise ValueError(f"example {self.report.id!r} has no components")
        if not self.root_cause_summary.strip():
            raise ValueError(f"example {self.report.id!r} has an empty summary")

    @property
    def id(self) -> str:
        return self.report.id

    @property
    def ground_truth(self) -> GroundTruth:
        return GroundTruth(self.report.id, self.root_cause_summary, self.components, self.report.system)


def example_from_json(d: dict) -> HistoricalExample:
    gt = d.get("ground_truth") or {}
    return HistoricalExample(IssueReport.from_json(d), gt.get("summary", ""), tuple(gt.get("components", [])))


def load_corpus(path) -> list[HistoricalExample]:
    """Read a corpus file: a JSON array of labeled issues."""
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    if not isinstance(doc, list):
        raise ValueError(f"{path}: corpus must be a JSON array")
    examples = [example_from_json(d) for d in doc]
    ids = [e.id for e in examples]
    if len(set(ids)) != len(ids):
        raise ValueError(f"{path}: duplicate issue ids in corpus")
    return examples


def load_issues(path) -> list[IssueReport]:
    """Read one issue (JSON object) or several (JSON array)."""
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    if isinstance(doc, dict):
        doc = [doc]
    return [IssueReport.from_json(d) for d in doc]
