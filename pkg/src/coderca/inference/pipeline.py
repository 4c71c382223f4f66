"""End-to-end diagnosis of one issue report."""

from __future__ import annotations

import logging
import time
from contextlib import contextmanager
from dataclasses import dataclass, field

from ..codefacts.ir import CodeFacts
from ..logsource import Attribution, TemplateTree, attribute_report, build_tree, restore_templates
from ..logsource.templates import DEFAULT_MAX_HOPS, DEFAULT_MAX_TEMPLATES
from ..pathrecon import (
    DEFAULT_MAX_DEPTH,
    DEFAULT_MAX_PATHS_PER_SEGMENT,
    RPC_HOP,
    CallGraph,
    ExecutionPath,
    bridge_rpcs,
    build_call_graph,
    reconstruct_paths,
)
from ..profiler import DEFAULT_RETRIEVAL_CAP, RetrievalSelection, build_index, retrieve_snippets
from ..report import IssueReport
from .bm25 import DEFAULT_EXAMPLES, bm25_rank
from .prompt import DEFAULT_RANKED_K, DEFAULT_TOKEN_BUDGET, Diagnosis, assemble_prompt, parse_diagnosis

logger = logging.getLogger(__name__)

TEMPERATURE = 0.0


@dataclass(frozen=True)
class PipelineConfig:
    max_depth: int = DEFAULT_MAX_DEPTH
    examples_n: int = DEFAULT_EXAMPLES
    retrieval_cap: int = DEFAULT_RETRIEVAL_CAP
    ranked_k: int = DEFAULT_RANKED_K
    token_budget: int = DEFAULT_TOKEN_BUDGET
    max_paths_per_segment: int = DEFAULT_MAX_PATHS_PER_SEGMENT
    max_restore_hops: int = DEFAULT_MAX_HOPS
    max_restore_templates: int = DEFAULT_MAX_TEMPLATES

    def __post_init__(self):
        if self.max_depth not in (1, 2, 3):
            raise ValueError("max_depth must be 1, 2 or 3")
        for name in ("examples_n", "retrieval_cap", "ranked_k", "token_budget", "max_paths_per_segment"):
            if getattr(self, name) < (0 if name == "examples_n" else 1):
                raise ValueError(f"{name} out of range: {getattr(self, name)}")


@dataclass
class StaticModel:
    """Everything derived from code facts alone, shared across reports."""

    facts: CodeFacts
    tree: TemplateTree
    graph: CallGraph
    bindings: list
    restore_diagnostics: list
    timings: dict = field(default_factory=dict)


class PhaseTimer:
    def __init__(self):
        self.timings: dict[str, float] = {}

    @contextmanager
    def phase(self, name: str):
        start = time.perf_counter()
        try:
            yield
        finally:
            self.timings[name] = self.timings.get(name, 0.0) + time.perf_counter() - start


def prepare(facts: CodeFacts, config: PipelineConfig = PipelineConfig(), timer: PhaseTimer | None = None,
            templates=None) -> StaticModel:
    timer = timer or PhaseTimer()
    diagnostics: list = []
    with timer.phase("templates"):
        if templates is None:
            templates = restore_templates(facts, max_hops=config.max_restore_hops,
                                          max_templates=config.max_restore_templates, diagnostics=diagnostics)
        tree = build_tree(templates)
    with timer.phase("call_graph"):
        graph, bindings = bridge_rpcs(build_call_graph(facts), facts)
    static = {k: timer.timings[k] for k in ("templates", "call_graph")}
    return StaticModel(facts, tree, graph, bindings, diagnostics, static)


def analyze(report: IssueReport, model: StaticModel, config: PipelineConfig, timer: PhaseTimer,
            attribution: Attribution | None = None, paths: list[ExecutionPath] | None = None):
    """Static phases for one report: code points, paths and the method index."""
    if attribution is None:
        with timer.phase("match"):
            attribution = attribute_report(model.facts, model.tree, report)
    if paths is None:
        with timer.phase("paths"):
            paths = reconstruct_paths(model.graph, model.facts, attribution.points, config.max_depth,
                                      config.max_paths_per_segment)
    with timer.phase("index"):
        index = build_index(paths, model.facts)
    return attribution, paths, index


def diagnose(report: IssueReport, facts: CodeFacts | None, corpus, llm, config: PipelineConfig = PipelineConfig(),
             *, model: StaticModel | None = None, attribution: Attribution | None = None,
             paths: list[ExecutionPath] | None = None) -> Diagnosis:
    """Run every phase for ``report`` and return the parsed, provenance-tagged diagnosis.

    ``attribution``/``paths`` may be supplied from earlier, separately run
    phases; the result is the same as computing them here.
    """
    timer = PhaseTimer()
    if model is None:
        model = prepare(facts, config, timer)
    attribution, paths, index = analyze(report, model, config, timer, attribution, paths)

    with timer.phase("retrieval"):
        if index:
            selection = retrieve_snippets(report, index, llm, config.retrieval_cap, model.facts)
        else:
            selection = RetrievalSelection((), (), (), False)
    with timer.phase("examples"):
        examples = bm25_rank(report, corpus, config.examples_n) if config.examples_n else []
    with timer.phase("prompt"):
        build = assemble_prompt(report, paths, selection, examples, config.token_budget,
                                {e.signature: e.order_hint for e in index}, config.ranked_k)
    with timer.phase("inference"):
        raw = llm.complete(build.text, temperature=TEMPERATURE)
    diagnosis = parse_diagnosis(raw, config.ranked_k)

    flags = list(diagnosis.flags)
    if not attribution.points:
        flags.append("code_free")
    diagnosis.flags = tuple(flags)
    diagnosis.issue_id = report.id
    diagnosis.provenance = {
        "model": getattr(llm, "model_name", "unknown"),
        "examples_used": list(build.examples_used),
        "snippets_used": list(build.snippets_used),
        "paths_used": len(paths),
        "code_points": [p.to_json() for p in attribution.points],
        "unmatched_logs": list(attribution.unmatched_logs),
        "unresolved_frames": list(attribution.unresolved_frames),
        "paths": [p.render() for p in paths],
        "rpc_hops": sum(1 for p in paths for s in p.steps if s.entry_reason == RPC_HOP),
        "unlinked_segments": sum(1 for p in paths if not p.linked),
        "retrieval": {
            "requested": list(selection.requested_signatures),
            "unresolved": list(selection.unresolved),
            "fallback": selection.fallback,
        },
        "dropped_snippets": list(build.dropped_snippets),
        "dropped_examples": list(build.dropped_examples),
        "over_budget": build.over_budget,
        "prompt_tokens": build.tokens,
    }
    diagnosis.timings = {**model.timings, **timer.timings}
    logger.debug("diagnosed %s in %.3fs", report.id, sum(timer.timings.values()))
    return diagnosis


class _Serialized:
    """Wraps an exclusive client so concurrent workers take turns."""

    def __init__(self, llm):
        import threading

        self._llm = llm
        self._lock = threading.Lock()
        self.model_name = getattr(llm, "model_name", "unknown")
        self.exclusive = False

    def complete(self, prompt: str, temperature: float = 0.0) -> str:
        with self._lock:
            return self._llm.complete(prompt, temperature)


def diagnose_many(reports, facts: CodeFacts, corpus, llm, config: PipelineConfig = PipelineConfig(),
                  jobs: int = 1, model: StaticModel | None = None) -> list[Diagnosis]:
    """Diagnose several reports against one static model; results keep input order."""
    from concurrent.futures import ThreadPoolExecutor

    if model is None:
        model = prepare(facts, config)
    if getattr(llm, "exclusive", False) and jobs > 1:
        llm = _Serialized(llm)
    if jobs <= 1:
        return [diagnose(r, facts, corpus, llm, config, model=model) for r in reports]
    with ThreadPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(lambda r: diagnose(r, facts, corpus, llm, config, model=model), reports))
