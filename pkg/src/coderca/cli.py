"""Command-line interface: one subcommand per pipeline phase.

Exit status: 0 success, 1 usage error, 2 input error, 3 LLM backend error.
"""

from __future__ import annotations

import argparse
import json
import logging
import sys
import time
from dataclasses import dataclass, field, fields
from pathlib import Path

from .codefacts import extract_project, load_facts, save_facts
from .errors import FormatError, LlmUnavailable, MissingGroundTruth, SourceSyntaxError, VersionMismatch
from .evalharness import evaluate_corpus
from .inference import Diagnosis, HttpLlm, MockLlm, PipelineConfig, diagnose, prepare
from .inference.pipeline import diagnose_many
from .logsource import Attribution, attribute_report, dump_templates_jsonl, load_templates_jsonl
from .logsource import restore_templates
from .pathrecon import ExecutionPath, graph_to_dot, reconstruct_paths
from .report import example_from_json, load_corpus, load_issues

log = logging.getLogger("coderca")

ARTIFACT_VERSION = 1

EXIT_OK, EXIT_USAGE, EXIT_INPUT, EXIT_LLM = 0, 1, 2, 3


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


@dataclass
class LlmSettings:
    backend: str = "mock"
    model: str | None = None
    endpoint: str | None = None
    mock_script: str | None = None
    api_key_env: str = "LLM_API_KEY"


@dataclass
class RunConfig:
    source_dir: str | None = None
    facts: str | None = None
    idl_dir: str | None = None
    corpus: str | None = None
    llm: LlmSettings = field(default_factory=LlmSettings)
    max_depth: int = 2
    examples_n: int = 5
    retrieval_cap: int = 10
    ranked_k: int = 5
    token_budget: int = 24000
    max_paths_per_segment: int = 5
    output_dir: str = "."
    jobs: int = 1

    def validate(self, needs_code: bool = True) -> None:
        if needs_code and (self.source_dir is None) == (self.facts is None):
            raise UsageError("exactly one of --source-dir / --facts is required")
        if self.max_depth not in (1, 2, 3):
            raise UsageError("--max-depth must be 1, 2 or 3")
        if self.llm.backend not in ("mock", "http"):
            raise UsageError("--llm must be 'mock' or 'http'")
        if self.jobs < 1:
            raise UsageError("--jobs must be at least 1")

    def pipeline(self) -> PipelineConfig:
        try:
            return PipelineConfig(self.max_depth, self.examples_n, self.retrieval_cap, self.ranked_k,
                                  self.token_budget, self.max_paths_per_segment)
        except ValueError as exc:
            raise UsageError(str(exc)) from exc


_SECRET_KEYS = {"api_key", "apikey", "key", "token", "secret", "password"}


def _load_config_file(path: str) -> dict:
    with open(path, encoding="utf-8") as fh:
        doc = json.load(fh)
    if not isinstance(doc, dict):
        raise UsageError(f"{path}: config must be a JSON object")
    llm = doc.get("llm", {})
    if any(k.lower() in _SECRET_KEYS for k in list(doc) + list(llm if isinstance(llm, dict) else {})):
        raise UsageError(f"{path}: config files must not hold secrets; set the API key in the environment")
    return doc


def build_config(args: argparse.Namespace) -> RunConfig:
    """Config file values first, then any flag given on the command line."""
    cfg = RunConfig()
    if getattr(args, "config", None):
        doc = _load_config_file(args.config)
        known = {f.name for f in fields(RunConfig)}
        for key, value in doc.items():
            if key == "llm":
                cfg.llm = LlmSettings(**{k: v for k, v in value.items() if k in {f.name for f in fields(LlmSettings)}})
            elif key in known:
                setattr(cfg, key, value)
            else:
                raise UsageError(f"{args.config}: unknown config key {key!r}")
    for name in ("source_dir", "facts", "idl_dir", "corpus", "max_depth", "examples_n", "retrieval_cap",
                 "ranked_k", "token_budget", "max_paths_per_segment", "output_dir", "jobs"):
        value = getattr(args, name, None)
        if value is not None:
            setattr(cfg, name, value)
    for flag, attr in (("llm", "backend"), ("model", "model"), ("endpoint", "endpoint"),
                       ("mock_script", "mock_script"), ("api_key_env", "api_key_env")):
        value = getattr(args, flag, None)
        if value is not None:
            setattr(cfg.llm, attr, value)
    return cfg


# -- helpers --------------------------------------------------------------------------


def _out(cfg: RunConfig, name: str) -> Path:
    out = Path(cfg.output_dir)
    out.mkdir(parents=True, exist_ok=True)
    return out / name


def _write_json(path: Path, doc) -> None:
    path.write_text(json.dumps(doc, indent=2, ensure_ascii=False) + "\n", encoding="utf-8")


def _facts(cfg: RunConfig, timings: dict | None = None):
    start = time.perf_counter()
    facts = load_facts(cfg.facts) if cfg.facts else extract_project(cfg.source_dir, cfg.idl_dir)
    if timings is not None:
        timings["extract"] = time.perf_counter() - start
    return facts


def _single_issue(args):
    issues = load_issues(args.issue)
    if args.issue_id:
        issues = [r for r in issues if r.id == args.issue_id]
        if not issues:
            raise KeyError(f"issue {args.issue_id!r} not found in {args.issue}")
    if len(issues) != 1:
        raise UsageError(f"{args.issue} holds {len(issues)} issues; pick one with --issue-id")
    return issues[0]


def _templates(args):
    if getattr(args, "templates", None):
        return load_templates_jsonl(Path(args.templates).read_text(encoding="utf-8"))
    return None


def _llm(cfg: RunConfig):
    s = cfg.llm
    if s.backend == "mock":
        llm = MockLlm.from_file(s.mock_script) if s.mock_script else MockLlm()
        if s.model:
            llm.model_name = s.model
        return llm
    if not s.endpoint or not s.model:
        raise UsageError("--llm http needs --endpoint and --model")
    return HttpLlm(s.endpoint, s.model, s.api_key_env)


# -- commands -------------------------------------------------------------------------


def cmd_extract(args, cfg: RunConfig) -> int:
    if not cfg.source_dir:
        raise UsageError("extract needs --source-dir")
    start = time.perf_counter()
    facts = extract_project(cfg.source_dir, cfg.idl_dir, args.project_version or "")
    path = _out(cfg, "facts.json")
    save_facts(facts, path)
    log.info("extracted %d methods, %d call edges, %d services in %.3fs", len(facts.methods),
             len(facts.call_edges), len(facts.idl_services), time.perf_counter() - start)
    print(path)
    return EXIT_OK


def cmd_templates(args, cfg: RunConfig) -> int:
    facts = _facts(cfg)
    cfg_p = cfg.pipeline()
    diagnostics: list = []
    templates = restore_templates(facts, max_hops=cfg_p.max_restore_hops, max_templates=cfg_p.max_restore_templates,
                                  diagnostics=diagnostics)
    for exc in diagnostics:
        log.warning("%s", exc)
    path = _out(cfg, "templates.jsonl")
    path.write_text(dump_templates_jsonl(templates), encoding="utf-8")
    print(path)
    return EXIT_OK


def _attribution(args, facts, cfg):
    if not args.issue:
        raise UsageError("--issue (or --matches) is required")
    report = _single_issue(args)
    model = prepare(facts, cfg.pipeline(), templates=_templates(args))
    return report, model, attribute_report(facts, model.tree, report)


def cmd_match(args, cfg: RunConfig) -> int:
    facts = _facts(cfg)
    report, _, attribution = _attribution(args, facts, cfg)
    path = _out(cfg, "matches.json")
    _write_json(path, {"artifact_version": ARTIFACT_VERSION, "issue_id": report.id, **attribution.to_json()})
    print(path)
    return EXIT_OK


def cmd_paths(args, cfg: RunConfig) -> int:
    facts = _facts(cfg)
    pcfg = cfg.pipeline()
    if args.matches:
        doc = json.loads(Path(args.matches).read_text(encoding="utf-8"))
        attribution = Attribution.from_json(doc)
        issue_id = doc.get("issue_id", "")
        model = prepare(facts, pcfg, templates=[])
    else:
        report, model, attribution = _attribution(args, facts, cfg)
        issue_id = report.id
    paths = reconstruct_paths(model.graph, facts, attribution.points, pcfg.max_depth, pcfg.max_paths_per_segment)
    path = _out(cfg, "paths.json")
    _write_json(path, {
        "artifact_version": ARTIFACT_VERSION,
        "issue_id": issue_id,
        "max_depth": pcfg.max_depth,
        "attribution": attribution.to_json(),
        "rpc_bindings": [{"service": b.service.service_name, "rpc": b.rpc_name, "client": b.client_call_edge.caller,
                          "server": b.server_impl_signature} for b in model.bindings],
        "paths": [p.to_json() for p in paths],
    })
    if args.dot:
        Path(args.dot).write_text(graph_to_dot(model.graph), encoding="utf-8")
    print(path)
    return EXIT_OK


def cmd_diagnose(args, cfg: RunConfig) -> int:
    load_time: dict = {}
    facts = _facts(cfg, load_time)
    pcfg = cfg.pipeline()
    corpus = load_corpus(cfg.corpus) if cfg.corpus else []
    llm = _llm(cfg)
    issues = load_issues(args.issue)
    if args.issue_id:
        issues = [r for r in issues if r.id == args.issue_id]
        if not issues:
            raise KeyError(f"issue {args.issue_id!r} not found in {args.issue}")
    if args.paths:
        if len(issues) != 1:
            raise UsageError("--paths applies to a single issue")
        doc = json.loads(Path(args.paths).read_text(encoding="utf-8"))
        attribution = Attribution.from_json(doc["attribution"])
        paths = [ExecutionPath.from_json(p) for p in doc["paths"]]
        model = prepare(facts, pcfg, templates=[])
        results = [diagnose(issues[0], facts, corpus, llm, pcfg, model=model, attribution=attribution, paths=paths)]
    else:
        results = diagnose_many(issues, facts, corpus, llm, pcfg, jobs=cfg.jobs)
    if len(results) == 1:
        path = _out(cfg, "diagnosis.json")
        _write_json(path, results[0].to_json())
    else:
        path = _out(cfg, "diagnoses.json")
        _write_json(path, [d.to_json() for d in results])
    timings = {d.issue_id: {**load_time, **d.timings} for d in results}
    if args.timings:
        # wall-clock numbers live outside output_dir so re-runs stay byte-identical
        _write_json(Path(args.timings), timings)
    for d in results:
        log.info("%s timings: %s", d.issue_id,
                 ", ".join(f"{k}={v:.4f}s" for k, v in timings[d.issue_id].items()))
        if d.flags:
            log.warning("%s: diagnosis flagged %s", d.issue_id, ", ".join(d.flags))
    print(path)
    return EXIT_OK


def _read_diagnoses(paths) -> dict[str, Diagnosis]:
    out: dict[str, Diagnosis] = {}
    for p in paths:
        doc = json.loads(Path(p).read_text(encoding="utf-8"))
        for d in doc if isinstance(doc, list) else [doc]:
            diag = Diagnosis.from_json(d)
            if not diag.issue_id:
                raise ValueError(f"{p}: diagnosis without issue_id")
            out[diag.issue_id] = diag
    return out


def cmd_evaluate(args, cfg: RunConfig) -> int:
    if not cfg.corpus:
        raise UsageError("evaluate needs --corpus with ground truth")
    doc = json.loads(Path(cfg.corpus).read_text(encoding="utf-8"))
    truths = {}
    for d in doc if isinstance(doc, list) else [doc]:
        if d.get("ground_truth"):
            gt = example_from_json(d).ground_truth
            truths[gt.issue_id] = gt
    card = evaluate_corpus(_read_diagnoses(args.diagnoses), truths, jobs=cfg.jobs)
    path = _out(cfg, "scorecard.json")
    path.write_text(card.dumps(), encoding="utf-8")
    sys.stdout.write(card.table())
    return EXIT_OK


# -- parser ---------------------------------------------------------------------------


def _common(p: argparse.ArgumentParser, code: bool = True) -> None:
    p.add_argument("--config", help="JSON run configuration; flags override its values")
    p.add_argument("--output-dir", help="directory for artifacts (default: current directory)")
    if code:
        p.add_argument("--source-dir", help="project source tree")
        p.add_argument("--idl-dir", help="proto files (default: searched under --source-dir)")
        p.add_argument("--facts", help="facts.json from a previous extract")
    p.add_argument("--max-depth", type=int, help="path depth in invocation hops (1-3, default 2)")
    p.add_argument("-v", "--verbose", action="store_true")


def make_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="coderca", description="Root cause analysis of issue reports against a code base.")
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    p = sub.add_parser("extract", help="parse sources into facts.json")
    _common(p)
    p.add_argument("--project-version")
    p.set_defaults(func=cmd_extract)

    p = sub.add_parser("templates", help="restore logging templates into templates.jsonl")
    _common(p)
    p.set_defaults(func=cmd_templates)

    for name, func, help_ in (("match", cmd_match, "attribute a report's logs and frames (matches.json)"),
                              ("paths", cmd_paths, "reconstruct execution paths (paths.json)")):
        p = sub.add_parser(name, help=help_)
        _common(p)
        p.add_argument("--issue", required=name == "match", help="issue JSON file")
        p.add_argument("--issue-id")
        p.add_argument("--templates", help="templates.jsonl to use instead of restoring again")
        if name == "paths":
            p.add_argument("--matches", help="matches.json from a previous match run")
            p.add_argument("--dot", help="also write the bridged call graph as DOT")
            p.add_argument("--max-paths-per-segment", type=int)
        p.set_defaults(func=func)

    p = sub.add_parser("diagnose", help="run the full pipeline (diagnosis.json)")
    _common(p)
    p.add_argument("--issue", required=True, help="issue JSON file (object or array)")
    p.add_argument("--issue-id")
    p.add_argument("--corpus", help="labeled historical issues (JSON array)")
    p.add_argument("--paths", help="paths.json from a previous paths run")
    p.add_argument("--llm", choices=("mock", "http"))
    p.add_argument("--model")
    p.add_argument("--endpoint")
    p.add_argument("--mock-script", help="JSON map of prompt hash to completion")
    p.add_argument("--api-key-env", help="environment variable holding the API key (default LLM_API_KEY)")
    p.add_argument("--examples-n", type=int)
    p.add_argument("--retrieval-cap", type=int)
    p.add_argument("--ranked-k", type=int)
    p.add_argument("--token-budget", type=int)
    p.add_argument("--max-paths-per-segment", type=int)
    p.add_argument("--jobs", type=int)
    p.add_argument("--timings", help="write per-phase wall-clock timings to this JSON file")
    p.set_defaults(func=cmd_diagnose)

    p = sub.add_parser("evaluate", help="score diagnoses against ground truth (scorecard.json)")
    _common(p, code=False)
    p.add_argument("--diagnoses", nargs="+", required=True, help="diagnosis.json / diagnoses.json files")
    p.add_argument("--corpus", required=True, help="labeled issues with ground_truth")
    p.add_argument("--jobs", type=int)
    p.set_defaults(func=cmd_evaluate)
    return parser


def main(argv=None) -> int:
    parser = make_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = build_config(args)
        cfg.validate(needs_code=args.command != "evaluate")
        return args.func(args, cfg)
    except UsageError as exc:
        print(f"coderca {args.command}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except LlmUnavailable as exc:
        print(f"coderca {args.command}: {exc}", file=sys.stderr)
        return EXIT_LLM
    except MissingGroundTruth as exc:
        print(f"coderca {args.command}: MissingGroundTruth: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except SourceSyntaxError as exc:
        print(f"coderca {args.command}: {exc.msg}", file=sys.stderr)
        return EXIT_INPUT
    except (FormatError, VersionMismatch, OSError, ValueError, KeyError, TypeError) as exc:
        # json.JSONDecodeError is a ValueError and carries its own position
        print(f"coderca {args.command}: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())
