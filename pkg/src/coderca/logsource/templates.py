"""Log templates and restoration of constructed logging statements.

A logging call such as ``LOG.warn(msg)`` only names a variable. Restoration
walks backwards from the call through the assignments that reach it, forking
at every ``if`` whose arms define the traced variable, and yields one
primitive template per feasible branch combination.
"""

from __future__ import annotations

import itertools
import json
import logging
import re
from dataclasses import dataclass

from ..codefacts.ir import Assign, Call, CodeFacts, Concat, Decl, If, LogCall, Other, StrLit, VarRef, iter_statements
from ..errors import RestorationDepthExceeded

logger = logging.getLogger(__name__)

WILDCARD = "<*>"
_SENTINEL = "\x00"

DEFAULT_MAX_HOPS = 8
DEFAULT_MAX_TEMPLATES = 2 ** 6


def is_wildcard(tok: str) -> bool:
    return tok == WILDCARD


def is_pattern(tok: str) -> bool:
    """A token mixing static text with embedded wildcards, e.g. ``(timeout=<*>)``."""
    return WILDCARD in tok and tok != WILDCARD


def static_chars(tok: str) -> int:
    return len(tok.replace(WILDCARD, ""))


def pattern_regex(tok: str) -> re.Pattern:
    return re.compile(".+".join(re.escape(seg) for seg in tok.split(WILDCARD)), re.S)


def coalesce(tokens) -> tuple[str, ...]:
    out: list[str] = []
    for tok in tokens:
        tok = re.sub(r"(?:<\*>)+", WILDCARD, tok)
        if tok == WILDCARD and out and out[-1] == WILDCARD:
            continue
        out.append(tok)
    return tuple(out)


def tokenize_template(text: str) -> tuple[str, ...]:
    """Split template text on whitespace; ``<*>`` marks wildcards."""
    return coalesce(text.split())


@dataclass(frozen=True)
class LogTemplate:
    tokens: tuple[str, ...]
    origin: tuple[str, int]
    branch_path: tuple[tuple[int, bool], ...] = ()

    def __post_init__(self):
        if not self.tokens:
            raise ValueError("template has no tokens")
        if coalesce(self.tokens) != tuple(self.tokens):
            raise ValueError(f"template tokens not coalesced: {self.tokens!r}")

    @property
    def static_char_count(self) -> int:
        return sum(static_chars(t) for t in self.tokens)

    @property
    def text(self) -> str:
        return " ".join(self.tokens)

    @property
    def sort_key(self):
        return (self.origin[0], self.origin[1], self.tokens, self.branch_path)

    def to_json(self) -> dict:
        return {
            "tokens": list(self.tokens),
            "origin": {"method": self.origin[0], "line": self.origin[1]},
            "branch_path": [[i, taken] for i, taken in self.branch_path],
            "static_char_count": self.static_char_count,
        }

    @classmethod
    def from_json(cls, d: dict) -> "LogTemplate":
        origin = d["origin"]
        return cls(tuple(d["tokens"]), (origin["method"], int(origin["line"])),
                   tuple((int(i), bool(t)) for i, t in d.get("branch_path", [])))


def dump_templates_jsonl(templates) -> str:
    return "".join(json.dumps(t.to_json(), ensure_ascii=False) + "\n" for t in templates)


def load_templates_jsonl(text: str) -> list[LogTemplate]:
    return [LogTemplate.from_json(json.loads(line)) for line in text.splitlines() if line.strip()]


# -- restoration ----------------------------------------------------------------------

# A frame is (block, index): "just before statement `index` of `block`".
# Frames nest outermost-first; a parent frame's index points at the enclosing if.


def _assigns(block, var: str) -> bool:
    return any(isinstance(st, (Assign, Decl)) and st.var == var for st in iter_statements(block))


def _locate(block, target: LogCall, frames=()):
    for i, st in enumerate(block):
        here = frames + ((block, i),)
        if st is target:
            return here, ()
        if isinstance(st, If):
            for taken, arm in ((True, st.then), (False, st.orelse)):
                found = _locate(arm, target, here)
                if found is not None:
                    inner, arms = found
                    return inner, ((st.id, taken),) + arms
    return None


class _Restorer:
    def __init__(self, max_hops: int, max_templates: int, signature: str, line: int):
        self.max_hops = max_hops
        self.max_templates = max_templates
        self.signature = signature
        self.line = line

    def _fail(self, reason: str):
        raise RestorationDepthExceeded(self.signature, self.line, reason)

    def reaching(self, var: str, frames):
        """Definitions of ``var`` reaching ``frames``: list of (expr|None, frames, branches)."""
        block, idx = frames[-1]
        for j in range(idx - 1, -1, -1):
            st = block[j]
            if isinstance(st, (Assign, Decl)) and st.var == var:
                if st.value is None:
                    return [(None, None, {})]
                return [(st.value, frames[:-1] + ((block, j),), {})]
            if isinstance(st, If) and (_assigns(st.then, var) or _assigns(st.orelse, var)):
                out = []
                for taken, arm in ((True, st.then), (False, st.orelse)):
                    arm_frames = frames[:-1] + ((block, j), (arm, len(arm)))
                    for expr, at, branches in self.reaching(var, arm_frames):
                        out.append((expr, at, {st.id: taken, **branches}))
                return out
        if len(frames) == 1:
            return [(None, None, {})]  # parameter, field or undeclared: dynamic
        return self.reaching(var, frames[:-1])

    def resolve(self, expr, frames, hops: int):
        """Possible shapes of ``expr``: list of (parts, branches); ``None`` parts are wildcards."""
        if isinstance(expr, StrLit):
            return [((expr.text,), {})]
        if isinstance(expr, Concat):
            out = []
            for (lp, lb), (rp, rb) in itertools.product(self.resolve(expr.left, frames, hops),
                                                      self.resolve(expr.right, frames, hops)):
                merged = _merge(lb, rb)
                if merged is not None:
                    out.append((lp + rp, merged))
            if len(out) > self.max_templates:
                self._fail("branches")
            return out
        if isinstance(expr, VarRef):
            out = []
            for value, at, branches in self.reaching(expr.name, frames):
                if value is None:
                    out.append(((None,), branches))
                    continue
                if hops + 1 > self.max_hops:
                    self._fail("depth")
                for parts, sub in self.resolve(value, at, hops + 1):
                    merged = _merge(branches, sub)
                    if merged is not None:
                        out.append((parts, merged))
            if len(out) > self.max_templates:
                self._fail("branches")
            return out
        if isinstance(expr, (Call, Other)):
            return [((None,), {})]
        raise TypeError(f"not an expression: {expr!r}")


def _merge(a: dict, b: dict):
    out = dict(a)
    for k, v in b.items():
        if out.get(k, v) != v:
            return None
        out[k] = v
    return out


def parts_to_tokens(parts) -> tuple[str, ...]:
    text = "".join(_SENTINEL if p is None else p for p in parts)
    return coalesce(tok.replace(_SENTINEL, WILDCARD) for tok in text.split())


def restore_statement(method, log_call: LogCall, *, max_hops: int = DEFAULT_MAX_HOPS,
                      max_templates: int = DEFAULT_MAX_TEMPLATES) -> list[LogTemplate]:
    """Primitive templates for one logging call.

    Raises RestorationDepthExceeded when either bound is hit.
    """
    located = _locate(method.body, log_call)
    if located is None:
        raise ValueError(f"log call at line {log_call.line} not found in {method.signature}")
    frames, enclosing = located
    r = _Restorer(max_hops, max_templates, method.signature, log_call.line)
    shapes = r.resolve(log_call.message, frames, 0)
    seen = set()
    out = []
    for parts, branches in shapes:
        tokens = parts_to_tokens(parts)
        if not tokens:
            continue
        path = tuple(sorted({**dict(enclosing), **branches}.items()))
        key = (tokens, path)
        if key not in seen:
            seen.add(key)
            out.append(LogTemplate(tokens, (method.signature, log_call.line), path))
    if len(out) > max_templates:
        r._fail("branches")
    return out


def restore_templates(facts: CodeFacts, *, max_hops: int = DEFAULT_MAX_HOPS,
                      max_templates: int = DEFAULT_MAX_TEMPLATES, diagnostics: list | None = None) -> list[LogTemplate]:
    """Restore every logging statement in ``facts`` to its primitive templates.

    Statements exceeding a bound degrade to a single ``<*>`` template; the
    exception is appended to ``diagnostics`` when given.
    """
    templates: list[LogTemplate] = []
    for sig, log_call in facts.logging_statements:
        method = facts.methods[sig]
        try:
            templates.extend(restore_statement(method, log_call, max_hops=max_hops, max_templates=max_templates))
        except RestorationDepthExceeded as exc:
            logger.warning("%s; degrading to a wildcard template", exc)
            if diagnostics is not None:
                diagnostics.append(exc)
            templates.append(LogTemplate((WILDCARD,), (sig, log_call.line)))
    return templates
