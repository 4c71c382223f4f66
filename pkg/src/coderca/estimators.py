"""Estimator-style wrappers (fit/predict/get_params) around the pipeline phases."""

from __future__ import annotations

from collections.abc import Iterable

from sklearn.base import BaseEstimator
from sklearn.utils.validation import check_is_fitted

from .codefacts.ir import CodeFacts
from .evalharness import evaluate_corpus
from .inference.bm25 import DEFAULT_EXAMPLES, bm25_rank
from .inference.pipeline import PipelineConfig, diagnose_many, prepare
from .logsource import LogLineParser, attribute_report, build_tree, match_log, restore_templates
from .logsource.templates import DEFAULT_MAX_HOPS, DEFAULT_MAX_TEMPLATES
from .pathrecon import DEFAULT_MAX_DEPTH, DEFAULT_MAX_PATHS_PER_SEGMENT
from .profiler import DEFAULT_RETRIEVAL_CAP
from .report import GroundTruth, HistoricalExample, IssueReport
from .inference.prompt import DEFAULT_RANKED_K, DEFAULT_TOKEN_BUDGET


def check_facts(facts) -> CodeFacts:
    if not isinstance(facts, CodeFacts):
        raise TypeError(f"expected CodeFacts, got {type(facts).__name__}")
    return facts


def check_reports(reports) -> list[IssueReport]:
    """Accept one report or an iterable of them."""
    if isinstance(reports, IssueReport):
        return [reports]
    if isinstance(reports, (str, bytes)) or not isinstance(reports, Iterable):
        raise TypeError("expected an IssueReport or an iterable of IssueReport")
    out = list(reports)
    for r in out:
        if not isinstance(r, IssueReport):
            raise TypeError(f"expected IssueReport, got {type(r).__name__}")
    return out


def check_corpus(corpus) -> list[HistoricalExample]:
    out = list(corpus or ())
    for ex in out:
        if not isinstance(ex, HistoricalExample):
            raise TypeError(f"expected HistoricalExample, got {type(ex).__name__}")
    return out


def check_messages(messages) -> list[str]:
    if isinstance(messages, str):
        return [messages]
    out = list(messages)
    for m in out:
        if not isinstance(m, str):
            raise TypeError(f"log lines must be str, got {type(m).__name__}")
    return out


class TemplateMatcher(BaseEstimator):
    """Restores templates from code facts and matches raw log lines to them."""

    def __init__(self, max_hops=DEFAULT_MAX_HOPS, max_templates=DEFAULT_MAX_TEMPLATES, timestamp_patterns=None):
        self.max_hops = max_hops
        self.max_templates = max_templates
        self.timestamp_patterns = timestamp_patterns

    def fit(self, facts, y=None):
        facts = check_facts(facts)
        self.diagnostics_ = []
        self.templates_ = restore_templates(facts, max_hops=self.max_hops, max_templates=self.max_templates,
                                            diagnostics=self.diagnostics_)
        self.tree_ = build_tree(self.templates_)
        self.facts_ = facts
        return self

    def _parser(self):
        if self.timestamp_patterns is None:
            return LogLineParser()
        return LogLineParser(self.timestamp_patterns)

    def predict(self, messages):
        """The winning MatchResult for each line, or None when nothing matches."""
        check_is_fitted(self, "tree_")
        parser = self._parser()
        return [match_log(self.tree_, parser.parse(m)) for m in check_messages(messages)]

    def transform(self, messages):
        """Template text per line ("" when unmatched)."""
        return [r.template.text if r else "" for r in self.predict(messages)]

    def attribute(self, reports):
        check_is_fitted(self, "tree_")
        return [attribute_report(self.facts_, self.tree_, r, self._parser()) for r in check_reports(reports)]


class ExampleSelector(BaseEstimator):
    """BM25 nearest historical issues for each query report."""

    def __init__(self, n_examples=DEFAULT_EXAMPLES):
        self.n_examples = n_examples

    def fit(self, corpus, y=None):
        self.corpus_ = check_corpus(corpus)
        return self

    def predict(self, reports):
        check_is_fitted(self, "corpus_")
        return [[ex.id for ex in bm25_rank(r, self.corpus_, self.n_examples)] for r in check_reports(reports)]


class RootCauseAnalyzer(BaseEstimator):
    """Full diagnosis: fit on a project's code facts and a labeled corpus, predict on reports."""

    def __init__(self, llm=None, max_depth=DEFAULT_MAX_DEPTH, examples_n=DEFAULT_EXAMPLES,
                 retrieval_cap=DEFAULT_RETRIEVAL_CAP, ranked_k=DEFAULT_RANKED_K, token_budget=DEFAULT_TOKEN_BUDGET,
                 max_paths_per_segment=DEFAULT_MAX_PATHS_PER_SEGMENT, n_jobs=1):
        self.llm = llm
        self.max_depth = max_depth
        self.examples_n = examples_n
        self.retrieval_cap = retrieval_cap
        self.ranked_k = ranked_k
        self.token_budget = token_budget
        self.max_paths_per_segment = max_paths_per_segment
        self.n_jobs = n_jobs

    def _config(self) -> PipelineConfig:
        return PipelineConfig(self.max_depth, self.examples_n, self.retrieval_cap, self.ranked_k,
                              self.token_budget, self.max_paths_per_segment)

    def fit(self, facts, corpus=()):
        if self.llm is None:
            raise ValueError("an LLM client is required")
        self.config_ = self._config()
        self.facts_ = check_facts(facts)
        self.corpus_ = check_corpus(corpus)
        self.model_ = prepare(self.facts_, self.config_)
        return self

    def predict(self, reports):
        check_is_fitted(self, "model_")
        return diagnose_many(check_reports(reports), self.facts_, self.corpus_, self.llm, self.config_,
                             jobs=self.n_jobs, model=self.model_)

    def score(self, reports, truths):
        """Mean exact match of the predictions against ``truths`` (id -> GroundTruth)."""
        reports = check_reports(reports)
        if not isinstance(truths, dict):
            truths = {t.issue_id: t for t in truths}
        for t in truths.values():
            if not isinstance(t, GroundTruth):
                raise TypeError(f"expected GroundTruth, got {type(t).__name__}")
        diagnoses = {d.issue_id: d for d in self.predict(reports)}
        card = evaluate_corpus(diagnoses, truths)
        return card.overall["exact_match"] if card.overall else 0.0
