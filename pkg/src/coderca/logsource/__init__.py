"""Logging-source retrieval: template restoration, matching and attribution."""

from .attribution import Attribution, CodePoint, StackFrame, attribute_report, parse_stack_trace, resolve_frame
from .matching import (
    LogLineParser,
    LogMessage,
    MatchResult,
    TemplateTree,
    build_tree,
    match_log,
    parse_log_line,
    split_tokens,
)
from .templates import (
    WILDCARD,
    LogTemplate,
    dump_templates_jsonl,
    load_templates_jsonl,
    restore_statement,
    restore_templates,
    tokenize_template,
)

__all__ = [
    "Attribution", "CodePoint", "LogLineParser", "LogMessage", "LogTemplate", "MatchResult", "StackFrame",
    "TemplateTree", "WILDCARD", "attribute_report", "build_tree", "dump_templates_jsonl", "load_templates_jsonl",
    "match_log", "parse_log_line", "parse_stack_trace", "resolve_frame", "restore_statement",
    "restore_templates", "split_tokens", "tokenize_template",
]
