"""Code facts: the method/call/logging model of a project and its sources."""

from __future__ import annotations

from pathlib import Path

from .idl import parse_idl
from .interchange import SCHEMA_VERSION, dumps_facts, load_facts, loads_facts, save_facts
from .ir import (
    Assign,
    Call,
    CallEdge,
    CodeFacts,
    Concat,
    Decl,
    EdgeKind,
    IdlService,
    If,
    Invoke,
    LogCall,
    MethodDecl,
    Other,
    Return,
    RpcMethod,
    StrLit,
    VarRef,
    strip_lines,
)
from .source_parser import parse_source_subset, render_block, render_expr, render_method

SOURCE_SUFFIXES = (".java",)
IDL_SUFFIXES = (".proto",)


def read_tree(root, suffixes) -> list[tuple[str, str]]:
    """Return ``(relative_path, text)`` for files under ``root``, sorted by path."""
    root = Path(root)
    files = sorted(p for p in root.rglob("*") if p.is_file() and p.suffix in suffixes)
    return [(p.relative_to(root).as_posix(), p.read_text(encoding="utf-8")) for p in files]


def extract_project(source_dir, idl_dir=None, project_version: str = "") -> CodeFacts:
    """Parse a source tree (and optional proto tree) into code facts."""
    services = parse_idl(read_tree(idl_dir, IDL_SUFFIXES)) if idl_dir else []
    if idl_dir is None:
        # protos commonly live next to the sources
        services = parse_idl(read_tree(source_dir, IDL_SUFFIXES))
    return parse_source_subset(read_tree(source_dir, SOURCE_SUFFIXES), services, project_version)


__all__ = [
    "Assign", "Call", "CallEdge", "CodeFacts", "Concat", "Decl", "EdgeKind", "IdlService", "If", "Invoke",
    "LogCall", "MethodDecl", "Other", "Return", "RpcMethod", "SCHEMA_VERSION", "StrLit", "VarRef",
    "dumps_facts", "extract_project", "load_facts", "loads_facts", "parse_idl", "parse_source_subset",
    "read_tree", "render_block", "render_expr", "render_method", "save_facts", "strip_lines",
]
