"""Code-facts intermediate representation.

Methods carry their bodies as small statement trees so that logging
statements can be restored and call sites located without re-reading source.
All node types are frozen dataclasses; two trees are structurally equal iff
they compare equal.
"""

from __future__ import annotations

import dataclasses
import enum
from dataclasses import dataclass, field
from typing import Iterator, Union

# -- expressions ------------------------------------------------------------


@dataclass(frozen=True)
class StrLit:
    text: str


@dataclass(frozen=True)
class VarRef:
    name: str


@dataclass(frozen=True)
class Concat:
    left: "Expr"
    right: "Expr"


@dataclass(frozen=True)
class Call:
    """Method invocation used as a value; opaque for log restoration."""

    name: str
    args: tuple["Expr", ...] = ()
    receiver: "Expr | None" = None
    line: int = 0


@dataclass(frozen=True)
class Other:
    """Any other expression, kept as canonical text plus nested operands.

    ``compound`` marks operator expressions that need parentheses when nested.
    """

    text: str
    parts: tuple["Expr", ...] = ()
    compound: bool = False


Expr = Union[StrLit, VarRef, Concat, Call, Other]

# -- statements ---------------------------------------------------------------


@dataclass(frozen=True)
class Assign:
    var: str
    value: Expr
    line: int = 0


@dataclass(frozen=True)
class Decl:
    var: str
    type_name: str
    value: Expr | None = None
    line: int = 0


@dataclass(frozen=True)
class LogCall:
    level: str
    message: Expr
    line: int = 0


@dataclass(frozen=True)
class Invoke:
    name: str
    args: tuple[Expr, ...] = ()
    receiver: Expr | None = None
    line: int = 0

    def as_call(self) -> Call:
        return Call(self.name, self.args, self.receiver, self.line)


@dataclass(frozen=True)
class If:
    cond: Expr
    then: tuple["Statement", ...]
    orelse: tuple["Statement", ...] = ()
    line: int = 0
    id: int = 0  # pre-order index among the method's if statements


@dataclass(frozen=True)
class Return:
    value: Expr | None = None
    line: int = 0


Statement = Union[Assign, Decl, LogCall, Invoke, If, Return]
Block = tuple  # tuple[Statement, ...]

# -- declarations -------------------------------------------------------------


@dataclass(frozen=True)
class MethodDecl:
    signature: str
    class_name: str
    name: str
    file: str
    line_span: tuple[int, int]
    body: tuple[Statement, ...] = ()
    params: tuple[tuple[str, str], ...] = ()  # (type, name)
    return_type: str = "void"
    doc_comment: str | None = None
    is_interface_method: bool = False
    implemented_interfaces_of_class: tuple[str, ...] = ()

    @property
    def simple_class_name(self) -> str:
        return self.class_name.rsplit(".", 1)[-1]


class EdgeKind(str, enum.Enum):
    STATIC = "static"
    RPC_BRIDGED = "rpc_bridged"


@dataclass(frozen=True)
class CallEdge:
    caller: str
    callee: str
    kind: EdgeKind = EdgeKind.STATIC
    call_site_line: int = 0
    resolved: bool = True  # unresolved static edges keep the textual callee name

    @property
    def key(self) -> tuple[str, str, int]:
        return (self.caller, self.callee, self.call_site_line)


@dataclass(frozen=True)
class RpcMethod:
    name: str
    request_type: str
    response_type: str


@dataclass(frozen=True)
class IdlService:
    service_name: str
    rpc_methods: tuple[RpcMethod, ...] = ()
    source_file: str = ""

    @property
    def rpc_names(self) -> list[str]:
        return [r.name for r in self.rpc_methods]


@dataclass(frozen=True)
class CodeFacts:
    methods: dict[str, MethodDecl] = field(default_factory=dict)
    call_edges: tuple[CallEdge, ...] = ()
    idl_services: tuple[IdlService, ...] = ()
    logging_statements: tuple[tuple[str, LogCall], ...] = ()
    project_version: str = ""

    @classmethod
    def build(cls, methods, call_edges=(), idl_services=(), project_version="") -> "CodeFacts":
        """Assemble facts, deriving the logging-statement list from method bodies."""
        methods = dict(methods)
        logs = tuple((sig, lc) for sig, m in methods.items() for lc in iter_log_calls(m.body))
        seen = set()
        edges = []
        for e in call_edges:
            if e.key not in seen:
                seen.add(e.key)
                edges.append(e)
        return cls(methods, tuple(edges), tuple(idl_services), logs, project_version)

    def method_by_class_and_name(self, class_name: str, name: str) -> list[MethodDecl]:
        """Methods whose class (fully-qualified or simple) and simple name match."""
        out = []
        for m in self.methods.values():
            if m.name != name:
                continue
            if m.class_name == class_name or m.simple_class_name == class_name:
                out.append(m)
        return out


# -- traversal helpers ----------------------------------------------------------


def iter_statements(block) -> Iterator[Statement]:
    """Pre-order walk over every statement, descending into if arms."""
    for st in block:
        yield st
        if isinstance(st, If):
            yield from iter_statements(st.then)
            yield from iter_statements(st.orelse)


def iter_log_calls(block) -> Iterator[LogCall]:
    for st in iter_statements(block):
        if isinstance(st, LogCall):
            yield st


def iter_exprs(expr: Expr | None) -> Iterator[Expr]:
    if expr is None:
        return
    yield expr
    if isinstance(expr, Concat):
        yield from iter_exprs(expr.left)
        yield from iter_exprs(expr.right)
    elif isinstance(expr, Call):
        yield from iter_exprs(expr.receiver)
        for a in expr.args:
            yield from iter_exprs(a)
    elif isinstance(expr, Other):
        for p in expr.parts:
            yield from iter_exprs(p)


def statement_exprs(st: Statement) -> list[Expr]:
    if isinstance(st, (Assign,)):
        return [st.value]
    if isinstance(st, Decl):
        return [st.value] if st.value is not None else []
    if isinstance(st, LogCall):
        return [st.message]
    if isinstance(st, Invoke):
        return [st.as_call()]
    if isinstance(st, If):
        return [st.cond]
    if isinstance(st, Return):
        return [st.value] if st.value is not None else []
    return []


def iter_calls(block) -> Iterator[Call]:
    """Every invocation in a body, statement-level and nested, in source order."""
    for st in iter_statements(block):
        for e in statement_exprs(st):
            for sub in iter_exprs(e):
                if isinstance(sub, Call):
                    yield sub


def strip_lines(node):
    """Copy of a statement/expression tree with every line number zeroed."""
    if isinstance(node, tuple):
        return tuple(strip_lines(n) for n in node)
    if not dataclasses.is_dataclass(node):
        return node
    changes = {}
    for f in dataclasses.fields(node):
        v = getattr(node, f.name)
        if f.name == "line":
            changes["line"] = 0
        elif isinstance(v, tuple) or dataclasses.is_dataclass(v):
            changes[f.name] = strip_lines(v)
    return dataclasses.replace(node, **changes)
