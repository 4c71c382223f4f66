"""JSON interchange for code facts (schema_version 1).

Statement and expression nodes are tagged objects ``{"kind": ..., ...}``.
External extractors for real systems feed the pipeline through this format.
"""

from __future__ import annotations

import json
import os

from ..errors import FormatError, VersionMismatch
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
    iter_log_calls,
)

SCHEMA_VERSION = 1


def expr_to_json(e):
    if e is None:
        return None
    if isinstance(e, StrLit):
        return {"kind": "str", "text": e.text}
    if isinstance(e, VarRef):
        return {"kind": "var", "name": e.name}
    if isinstance(e, Concat):
        return {"kind": "concat", "left": expr_to_json(e.left), "right": expr_to_json(e.right)}
    if isinstance(e, Call):
        return {"kind": "call", "name": e.name, "args": [expr_to_json(a) for a in e.args],
                "receiver": expr_to_json(e.receiver), "line": e.line}
    if isinstance(e, Other):
        return {"kind": "other", "text": e.text, "parts": [expr_to_json(p) for p in e.parts],
                "compound": e.compound}
    raise TypeError(f"not an expression: {e!r}")


def expr_from_json(d):
    if d is None:
        return None
    kind = d["kind"]
    if kind == "str":
        return StrLit(d["text"])
    if kind == "var":
        return VarRef(d["name"])
    if kind == "concat":
        return Concat(expr_from_json(d["left"]), expr_from_json(d["right"]))
    if kind == "call":
        return Call(d["name"], tuple(expr_from_json(a) for a in d.get("args", [])),
                    expr_from_json(d.get("receiver")), d.get("line", 0))
    if kind == "other":
        return Other(d["text"], tuple(expr_from_json(p) for p in d.get("parts", [])), d.get("compound", False))
    raise ValueError(f"unknown expression kind {kind!r}")


def stmt_to_json(st):
    if isinstance(st, Assign):
        return {"kind": "assign", "var": st.var, "value": expr_to_json(st.value), "line": st.line}
    if isinstance(st, Decl):
        return {"kind": "decl", "var": st.var, "type": st.type_name, "value": expr_to_json(st.value),
                "line": st.line}
    if isinstance(st, LogCall):
        return {"kind": "log", "level": st.level, "message": expr_to_json(st.message), "line": st.line}
    if isinstance(st, Invoke):
        return {"kind": "invoke", "name": st.name, "args": [expr_to_json(a) for a in st.args],
                "receiver": expr_to_json(st.receiver), "line": st.line}
    if isinstance(st, If):
        return {"kind": "if", "id": st.id, "cond": expr_to_json(st.cond),
                "then": [stmt_to_json(s) for s in st.then], "else": [stmt_to_json(s) for s in st.orelse],
                "line": st.line}
    if isinstance(st, Return):
        return {"kind": "return", "value": expr_to_json(st.value), "line": st.line}
    raise TypeError(f"not a statement: {st!r}")


def stmt_from_json(d):
    kind = d["kind"]
    line = d.get("line", 0)
    if kind == "assign":
        return Assign(d["var"], expr_from_json(d["value"]), line)
    if kind == "decl":
        return Decl(d["var"], d.get("type", "String"), expr_from_json(d.get("value")), line)
    if kind == "log":
        return LogCall(d["level"], expr_from_json(d["message"]), line)
    if kind == "invoke":
        return Invoke(d["name"], tuple(expr_from_json(a) for a in d.get("args", [])),
                      expr_from_json(d.get("receiver")), line)
    if kind == "if":
        return If(expr_from_json(d["cond"]), tuple(stmt_from_json(s) for s in d.get("then", [])),
                  tuple(stmt_from_json(s) for s in d.get("else", [])), line, d.get("id", 0))
    if kind == "return":
        return Return(expr_from_json(d.get("value")), line)
    raise ValueError(f"unknown statement kind {kind!r}")


def method_to_json(m: MethodDecl) -> dict:
    return {
        "signature": m.signature,
        "class_name": m.class_name,
        "name": m.name,
        "file": m.file,
        "line_span": list(m.line_span),
        "params": [list(p) for p in m.params],
        "return_type": m.return_type,
        "doc_comment": m.doc_comment,
        "is_interface_method": m.is_interface_method,
        "implemented_interfaces_of_class": list(m.implemented_interfaces_of_class),
        "body": [stmt_to_json(s) for s in m.body],
    }


def method_from_json(d: dict) -> MethodDecl:
    return MethodDecl(
        signature=d["signature"],
        class_name=d["class_name"],
        name=d.get("name") or d["signature"].split("(", 1)[0].rsplit(".", 1)[-1],
        file=d.get("file", ""),
        line_span=tuple(d["line_span"]),
        body=tuple(stmt_from_json(s) for s in d.get("body", [])),
        params=tuple(tuple(p) for p in d.get("params", [])),
        return_type=d.get("return_type", "void"),
        doc_comment=d.get("doc_comment"),
        is_interface_method=bool(d.get("is_interface_method", False)),
        implemented_interfaces_of_class=tuple(d.get("implemented_interfaces_of_class", [])),
    )


def edge_to_json(e: CallEdge) -> dict:
    return {"caller": e.caller, "callee": e.callee, "kind": e.kind.value,
            "call_site_line": e.call_site_line, "resolved": e.resolved}


def edge_from_json(d: dict) -> CallEdge:
    return CallEdge(d["caller"], d["callee"], EdgeKind(d.get("kind", "static")),
                    d.get("call_site_line", 0), d.get("resolved", True))


def service_to_json(s: IdlService) -> dict:
    return {"service_name": s.service_name, "source_file": s.source_file,
            "rpc_methods": [{"name": r.name, "request_type": r.request_type, "response_type": r.response_type}
                            for r in s.rpc_methods]}


def service_from_json(d: dict) -> IdlService:
    return IdlService(d["service_name"],
                      tuple(RpcMethod(r["name"], r.get("request_type", ""), r.get("response_type", ""))
                            for r in d.get("rpc_methods", [])),
                      d.get("source_file", ""))


def facts_to_json(facts: CodeFacts) -> dict:
    log_refs = []
    for sig, lc in facts.logging_statements:
        calls = list(iter_log_calls(facts.methods[sig].body))
        log_refs.append({"method": sig, "index": next(i for i, c in enumerate(calls) if c is lc or c == lc),
                         "line": lc.line})
    return {
        "schema_version": SCHEMA_VERSION,
        "project_version": facts.project_version,
        "methods": [method_to_json(m) for m in facts.methods.values()],
        "call_edges": [edge_to_json(e) for e in facts.call_edges],
        "idl_services": [service_to_json(s) for s in facts.idl_services],
        "logging_statements": log_refs,
    }


def facts_from_json(doc: dict) -> CodeFacts:
    if not isinstance(doc, dict):
        raise FormatError(0, "top-level value must be an object")
    version = doc.get("schema_version")
    if version != SCHEMA_VERSION:
        raise VersionMismatch(version, [SCHEMA_VERSION])
    try:
        methods = {}
        for md in doc.get("methods", []):
            m = method_from_json(md)
            methods[m.signature] = m
        edges = tuple(edge_from_json(e) for e in doc.get("call_edges", []))
        services = tuple(service_from_json(s) for s in doc.get("idl_services", []))
    except (KeyError, TypeError, ValueError) as exc:
        raise FormatError(0, f"invalid facts document: {exc!r}") from exc
    facts = CodeFacts.build(methods, edges, services, doc.get("project_version", ""))
    if "logging_statements" in doc:
        refs = []
        for ref in doc["logging_statements"]:
            sig = ref.get("method")
            if sig not in methods:
                raise FormatError(0, f"logging statement refers to unknown method {sig!r}")
            calls = list(iter_log_calls(methods[sig].body))
            idx = ref.get("index", 0)
            if not 0 <= idx < len(calls):
                raise FormatError(0, f"logging statement index {idx} out of range in {sig}")
            refs.append((sig, calls[idx]))
        facts = CodeFacts(facts.methods, facts.call_edges, facts.idl_services, tuple(refs), facts.project_version)
    return facts


def dumps_facts(facts: CodeFacts) -> str:
    return json.dumps(facts_to_json(facts), indent=2, ensure_ascii=False) + "\n"


def loads_facts(text: str) -> CodeFacts:
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise FormatError(exc.pos, exc.msg) from exc
    return facts_from_json(doc)


def save_facts(facts: CodeFacts, path: str | os.PathLike) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(dumps_facts(facts))


def load_facts(path: str | os.PathLike) -> CodeFacts:
    with open(path, encoding="utf-8") as fh:
        return loads_facts(fh.read())
