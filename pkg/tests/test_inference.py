import json
import random
import threading

import pytest
import requests
from hypothesis import given, settings
from hypothesis import strategies as st

from coderca.codefacts import extract_project
from coderca.errors import LlmUnavailable
from coderca.inference import (
    CANNED_COMPLETION,
    HttpLlm,
    MockLlm,
    PipelineConfig,
    assemble_prompt,
    bm25_rank,
    bm25_scores,
    diagnose,
    diagnose_many,
    estimate_tokens,
    parse_diagnosis,
    prompt_hash,
    tokenize,
)
from coderca.inference.bm25 import document_text, query_text
from coderca.profiler import RetrievalSelection
from coderca.report import HistoricalExample, IssueReport, load_corpus, load_issues

from oracles import ref_bm25, ref_tokenize

WORDS = ["staging", "area", "ResourceManager", "JobClient", "cleanup", "timeout", "NameNode", "lease", "block",
         "HTTPServer", "region", "split", "scheduler", "ready", "submit", "v2", "IOException", "RPC", "quorum"]


def example(i, title, desc="", comps=("Comp",)):
    return HistoricalExample(IssueReport(i, title, description=desc), "summary of " + i, tuple(comps))


def synthetic_corpus(seed=3, n=20):
    rng = random.Random(seed)
    docs = []
    for i in range(n):
        title = " ".join(rng.choice(WORDS) for _ in range(rng.randint(2, 6)))
        desc = " ".join(rng.choice(WORDS) for _ in range(rng.randint(0, 15)))
        comps = [rng.choice(["JobClient", "ClientRMService", "FSNamesystem", "HRegionServer"])]
        docs.append(example(f"D-{i:02d}", title, desc, comps))
    return docs


# -- BM25 ------------------------------------------------------------------------------------


def test_tokenizer_matches_reference():
    for text in ["ClientRMService.submitApplication failed", "HTTPServer2 v2Beta x_y", "ABCd aB1c", ""]:
        assert tokenize(text) == ref_tokenize(text)
    assert tokenize("getHTTPResponseCode") == ["get", "http", "response", "code"]


def test_bm25_matches_reference():
    corpus = synthetic_corpus()
    query = IssueReport("Q", "staging area cleanup after submit", description="ResourceManager scheduler not ready")
    ranked = bm25_scores(query, corpus)
    ref = ref_bm25(ref_tokenize(query_text(query)), [ref_tokenize(document_text(d)) for d in corpus])
    ref_ranked = sorted(zip(corpus, ref), key=lambda p: (-p[1], p[0].id))
    assert [d.id for d, _ in ranked[:5]] == [d.id for d, _ in ref_ranked[:5]]
    for (_, s), (_, r) in zip(ranked, ref_ranked):
        assert s == pytest.approx(r, abs=1e-6)


def test_rare_term_wins():
    corpus = [example("A", "lease recovery"), example("B", "staging directory leak"), example("C", "lease timeout")]
    assert bm25_rank(IssueReport("Q", "staging"), corpus)[0].id == "B"


def test_identical_documents_tie_by_id():
    corpus = [example(i, "same words here") for i in ("c", "a", "b")]
    assert [e.id for e in bm25_rank(IssueReport("Q", "same words"), corpus)] == ["a", "b", "c"]


def test_self_exclusion_and_sizes():
    corpus = synthetic_corpus(n=8)
    q = corpus[3].report
    ranked = bm25_rank(q, corpus, 20)
    assert q.id not in [e.id for e in ranked] and len(ranked) == 7
    assert len(bm25_rank(q, corpus)) == 5
    assert bm25_rank(q, []) == []


@settings(max_examples=50, deadline=None)
@given(st.permutations(synthetic_corpus(seed=9, n=12)))
def test_rank_invariant_to_corpus_order(perm):
    q = IssueReport("Q", "region split scheduler", description="JobClient cleanup")
    assert [e.id for e in bm25_rank(q, perm)] == [e.id for e in bm25_rank(q, synthetic_corpus(seed=9, n=12))]


# -- prompt ---------------------------------------------------------------------------------

REPORT = IssueReport("R-1", "Job fails", description="Staging area removed", log_lines=("a log line",))


def selection(n, size=400):
    resolved = tuple((f"p.C.m{i}()", f"void m{i}() {{\n{'x' * size}\n}}", (i, i + 2)) for i in range(n))
    return RetrievalSelection(tuple(r[0] for r in resolved), resolved, ())


def test_prompt_is_deterministic_and_ordered():
    examples = synthetic_corpus(n=3)
    a = assemble_prompt(REPORT, [], selection(2), examples).text
    b = assemble_prompt(REPORT, [], selection(2), examples).text
    assert a == b
    order = ["## Issue report", "## Reconstructed execution paths", "## Retrieved code snippets",
             "## Historical examples", "```SUMMARY", "```COMPONENTS\nPRIMARY SET"]
    positions = [a.index(h) for h in order]
    assert positions == sorted(positions)


def test_placeholders():
    text = assemble_prompt(REPORT, [], None, []).text
    assert "(no code snippets retrieved)" in text
    assert "(no historical examples)" in text
    assert "(no execution paths reconstructed)" in text


def test_over_budget_drops_snippets_first():
    examples = synthetic_corpus(n=3)
    full = assemble_prompt(REPORT, [], selection(3), examples, token_budget=10 ** 6)
    budget = full.tokens - 50  # one snippet too many
    build = assemble_prompt(REPORT, [], selection(3), examples, token_budget=budget,
                            order_hints={"p.C.m0()": 0, "p.C.m1()": 2, "p.C.m2()": 1})
    assert build.dropped_snippets == ("p.C.m1()",)  # highest order hint goes first
    assert build.dropped_examples == ()
    assert build.tokens <= budget and not build.over_budget


def test_examples_dropped_after_snippets_and_report_kept():
    examples = synthetic_corpus(n=4)
    build = assemble_prompt(REPORT, [], selection(2), examples, token_budget=200)
    assert len(build.dropped_snippets) == 2
    assert build.examples_used == (examples[0].id,)
    assert build.over_budget  # the report and one example alone exceed 200 tokens
    assert "Staging area removed" in build.text


@settings(max_examples=40, deadline=None)
@given(st.integers(100, 3000), st.integers(0, 2000))
def test_budget_monotone(small, extra):
    examples = synthetic_corpus(n=5)
    lo = assemble_prompt(REPORT, [], selection(5, 300), examples, token_budget=small)
    hi = assemble_prompt(REPORT, [], selection(5, 300), examples, token_budget=small + extra)
    assert set(lo.snippets_used) <= set(hi.snippets_used)
    assert set(lo.examples_used) <= set(hi.examples_used)


def test_estimate_tokens():
    assert estimate_tokens("") == 0 and estimate_tokens("abcd") == 1 and estimate_tokens("abcde") == 2


# -- reply parsing ---------------------------------------------------------------------------

WELL_FORMED = """```SUMMARY
The scheduler is not ready.
```
```COMPONENTS
PRIMARY SET
ClientRMService
ResourceScheduler
END PRIMARY SET
YARNRunner
JobSubmitter
RMAppManager
```"""


def test_parse_well_formed():
    d = parse_diagnosis(WELL_FORMED, 5)
    assert d.summary == "The scheduler is not ready."
    assert len(d.ranked_components) == 5
    assert d.primary_components == ("ClientRMService", "ResourceScheduler")
    assert not d.flags


def test_parse_dedup_and_truncate():
    raw = WELL_FORMED.replace("YARNRunner", "YARNRunner\n- clientrmservice\n1. YARNRunner")
    d = parse_diagnosis(raw, 3)
    assert d.ranked_components == ("ClientRMService", "ResourceScheduler", "YARNRunner")


def test_parse_missing_components():
    d = parse_diagnosis("```SUMMARY\nonly prose\n```", 5)
    assert d.summary == "only prose"
    assert d.ranked_components == () and d.primary_components == ()
    assert d.flags == ("malformed_output:COMPONENTS",)


def test_parse_missing_everything():
    d = parse_diagnosis("no structure at all", 5)
    assert d.summary == "no structure at all"
    assert set(d.flags) == {"malformed_output:SUMMARY", "malformed_output:COMPONENTS"}


def test_parse_without_markers_uses_top_component():
    d = parse_diagnosis("```SUMMARY\ns\n```\n```COMPONENTS\nA\nB\n```", 5)
    assert d.primary_components == ("A",) and d.ranked_components == ("A", "B")


# -- LLM clients ----------------------------------------------------------------------------


def test_mock_script_lookup(tmp_path):
    path = tmp_path / "script.json"
    path.write_text(json.dumps({prompt_hash("hello"): "scripted", "default": "fallback"}))
    llm = MockLlm.from_file(path)
    assert llm.complete("hello") == "scripted"
    assert llm.complete("other") == "fallback"
    assert MockLlm().complete("x") == CANNED_COMPLETION
    assert [c[1] for c in llm.calls] == [0.0, 0.0]


class FakeResponse:
    def __init__(self, payload, status=200):
        self.payload = payload
        self.status = status

    def raise_for_status(self):
        if self.status >= 400:
            raise requests.HTTPError(f"{self.status}")

    def json(self):
        return self.payload


def test_http_client_request_shape(monkeypatch):
    seen = {}

    def fake_post(url, json=None, headers=None, timeout=None):
        seen.update(url=url, body=json, headers=headers)
        return FakeResponse({"choices": [{"message": {"content": "first"}}, {"message": {"content": "second"}}]})

    monkeypatch.setattr(requests, "post", fake_post)
    monkeypatch.setenv("MY_KEY", "sekret")
    llm = HttpLlm("http://llm.local/v1/chat/completions", "some-model", api_key_env="MY_KEY")
    assert llm.complete("prompt text", temperature=0.0) == "first"
    assert seen["body"]["temperature"] == 0.0
    assert seen["body"]["messages"] == [{"role": "user", "content": "prompt text"}]
    assert seen["headers"]["Authorization"] == "Bearer sekret"


def test_http_client_errors(monkeypatch):
    monkeypatch.setattr(requests, "post", lambda *a, **k: FakeResponse({}, 503))
    with pytest.raises(LlmUnavailable):
        HttpLlm("http://x", "m").complete("p")

    def refuse(*a, **k):
        raise requests.ConnectionError("refused")

    monkeypatch.setattr(requests, "post", refuse)
    with pytest.raises(LlmUnavailable):
        HttpLlm("http://x", "m").complete("p")


# -- pipeline --------------------------------------------------------------------------------


@pytest.fixture
def mr(fixtures):
    base = fixtures / "mr2953"
    facts = extract_project(base / "src", base / "proto")
    (issue,) = load_issues(base / "issue.json")
    corpus = load_corpus(base / "corpus.json")
    return facts, issue, corpus, MockLlm.from_file(base / "mock_script.json")


def test_end_to_end_mr2953(mr):
    facts, issue, corpus, llm = mr
    d = diagnose(issue, facts, corpus, llm)
    prov = d.provenance
    assert prov["rpc_hops"] >= 1
    assert any(" =RPC=> " in p for p in prov["paths"])
    assert any("Cleaning up the staging area" in p["evidence"] for p in prov["code_points"])
    assert issue.id not in prov["examples_used"] and len(prov["examples_used"]) == 5
    assert prov["snippets_used"] and prov["paths_used"] == len(prov["paths"])
    assert d.primary_components == ("ClientRMService",)
    assert len(llm.calls) == 2 and all(t == 0.0 for _, t in llm.calls)
    assert {"match", "paths", "index", "retrieval", "examples", "prompt", "inference", "templates",
            "call_graph"} <= set(d.timings)


def test_deterministic_diagnosis(mr):
    facts, issue, corpus, llm = mr
    runs = [json.dumps(diagnose(issue, facts, corpus, llm).to_json(), indent=2) for _ in range(3)]
    assert runs[0] == runs[1] == runs[2]


def test_empty_corpus(mr):
    facts, issue, _, llm = mr
    d = diagnose(issue, facts, [], llm)
    assert d.provenance["examples_used"] == []
    assert "(no historical examples)" in llm.calls[-1][0]


def test_code_free_report(mr):
    facts, _, corpus, llm = mr
    report = IssueReport("Z-1", "Third party crash", log_lines=("com.vendor.Lib: exploded",))
    d = diagnose(report, facts, corpus, llm)
    assert "code_free" in d.flags
    prompt = llm.calls[-1][0]
    assert "(no code snippets retrieved)" in prompt and "(no execution paths reconstructed)" in prompt
    assert len(llm.calls) == 1  # nothing to retrieve from


def test_llm_unavailable_propagates(mr):
    facts, issue, corpus, _ = mr

    class Down:
        model_name = "down"

        def complete(self, prompt, temperature=0.0):
            raise LlmUnavailable("503")

    with pytest.raises(LlmUnavailable):
        diagnose(issue, facts, corpus, Down())


def test_concurrent_batch_serializes_exclusive_client(mr):
    facts, issue, corpus, _ = mr

    class Exclusive:
        model_name = "excl"
        exclusive = True

        def __init__(self):
            self.active = 0
            self.max_active = 0
            self.lock = threading.Lock()

        def complete(self, prompt, temperature=0.0):
            with self.lock:
                self.active += 1
                self.max_active = max(self.max_active, self.active)
            threading.Event().wait(0.005)
            with self.lock:
                self.active -= 1
            return WELL_FORMED

    reports = [IssueReport(f"B-{i}", issue.title, log_lines=issue.log_lines) for i in range(6)]
    llm = Exclusive()
    out = diagnose_many(reports, facts, corpus, llm, PipelineConfig(), jobs=4)
    assert [d.issue_id for d in out] == [r.id for r in reports]
    assert llm.max_active == 1
    serial = diagnose_many(reports, facts, corpus, MockLlm({"default": WELL_FORMED}), PipelineConfig(), jobs=1)
    assert [d.to_json()["summary"] for d in out] == [d.to_json()["summary"] for d in serial]


def test_config_validation():
    for bad in ({"max_depth": 0}, {"max_depth": 4}, {"ranked_k": 0}, {"examples_n": -1}):
        with pytest.raises(ValueError):
            PipelineConfig(**bad)
