"""Prefix-tree matching of runtime log messages against restored templates."""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from .templates import WILDCARD, LogTemplate, is_pattern, pattern_regex

DEFAULT_TIMESTAMP_PATTERNS = (
    r"\d{4}-\d{2}-\d{2}[ T]\d{2}:\d{2}:\d{2}(?:[,.]\d{1,6})?(?:Z|[+-]\d{2}:?\d{2})?",
    r"\d{2}/\d{2}/\d{2} \d{2}:\d{2}:\d{2}(?:[,.]\d{1,6})?",
    r"\d{6} \d{6}(?: \d+)?",
)
_LEVELS = r"TRACE|DEBUG|INFO|WARN|WARNING|ERROR|FATAL|SEVERE"


def split_tokens(text: str) -> list[str]:
    """Whitespace split; punctuation stays attached to its token."""
    return text.split()


@dataclass(frozen=True)
class LogMessage:
    raw: str
    tokens: tuple[str, ...]
    payload: str
    timestamp: str | None = None
    level: str | None = None
    logger: str | None = None


class LogLineParser:
    """Splits ``TIMESTAMP LEVEL [thread] logger: payload`` lines.

    Lines that do not fit are taken whole as payload.
    """

    def __init__(self, timestamp_patterns=DEFAULT_TIMESTAMP_PATTERNS):
        self.timestamp_patterns = tuple(timestamp_patterns)
        ts = "|".join(f"(?:{p})" for p in self.timestamp_patterns)
        self._rx = re.compile(
            rf"^\s*(?P<ts>{ts})\s+(?:\[[^\]]*\]\s+)?(?P<level>{_LEVELS})\s+(?:\[[^\]]*\]\s+)?"
            r"(?:(?P<logger>[\w$]+(?:\.[\w$]+)+):\s+)?(?P<payload>.*)$",
            re.S,
        )

    def parse(self, line: str) -> LogMessage:
        line = line.rstrip("\r\n")
        m = self._rx.match(line)
        if m is None:
            payload = line.strip()
            return LogMessage(line, tuple(split_tokens(payload)), payload)
        payload = m.group("payload").strip()
        return LogMessage(line, tuple(split_tokens(payload)), payload, m.group("ts"), m.group("level"),
                          m.group("logger"))


def parse_log_line(line: str) -> LogMessage:
    return _DEFAULT_PARSER.parse(line)


_DEFAULT_PARSER = LogLineParser()


class _Node:
    __slots__ = ("children", "patterns", "templates")

    def __init__(self):
        self.children: dict[str, _Node] = {}
        self.patterns: list[tuple[re.Pattern, _Node]] = []
        self.templates: list[LogTemplate] = []

    def anchors(self, tok: str) -> bool:
        if tok != WILDCARD and tok in self.children:
            return True
        return any(rx.fullmatch(tok) for rx, _ in self.patterns)


@dataclass
class TemplateTree:
    root: _Node = field(default_factory=_Node)
    size: int = 0

    def insert(self, template: LogTemplate) -> None:
        node = self.root
        for tok in template.tokens:
            child = node.children.get(tok)
            if child is None:
                child = node.children[tok] = _Node()
                if is_pattern(tok):
                    node.patterns.append((pattern_regex(tok), child))
            node = child
        node.templates.append(template)
        self.size += 1

    def find(self, tokens) -> list[LogTemplate]:
        """Templates stored at the terminal reached by walking ``tokens`` literally."""
        node = self.root
        for tok in tokens:
            node = node.children.get(tok)
            if node is None:
                return []
        return list(node.templates)

    def templates(self) -> list[LogTemplate]:
        out, stack = [], [self.root]
        while stack:
            node = stack.pop()
            out.extend(node.templates)
            stack.extend(node.children.values())
        return out


def build_tree(templates) -> TemplateTree:
    tree = TemplateTree()
    for t in templates:
        tree.insert(t)
    return tree


@dataclass(frozen=True)
class MatchResult:
    template: LogTemplate
    all_candidates: tuple[LogTemplate, ...]

    @property
    def code_point(self) -> tuple[str, int]:
        return self.template.origin


def _match(node: _Node, toks, i: int, out: list) -> None:
    n = len(toks)
    if i == n:
        out.extend(node.templates)
        return
    tok = toks[i]
    if tok != WILDCARD:
        child = node.children.get(tok)
        if child is not None:
            _match(child, toks, i + 1, out)
    for rx, child in node.patterns:
        if rx.fullmatch(tok):
            _match(child, toks, i + 1, out)
    wild = node.children.get(WILDCARD)
    if wild is not None:
        # the wildcard swallows toks[i:j] (at least one token) and resumes at an anchor
        for j in range(i + 1, n):
            if wild.anchors(toks[j]):
                _match(wild, toks, j, out)
        out.extend(wild.templates)


def match_log(tree: TemplateTree, msg: LogMessage | str) -> MatchResult | None:
    """Match one message against every template in the tree (no pruning)."""
    if isinstance(msg, str):
        msg = parse_log_line(msg)
    if not msg.tokens:
        return None
    found: list[LogTemplate] = []
    _match(tree.root, msg.tokens, 0, found)
    if not found:
        return None
    unique = list({id(t): t for t in found}.values())
    unique.sort(key=lambda t: (-t.static_char_count, t.sort_key))
    return MatchResult(unique[0], tuple(unique))
