import pytest
from sklearn.base import clone
from sklearn.exceptions import NotFittedError

from coderca.codefacts import extract_project
from coderca.estimators import ExampleSelector, RootCauseAnalyzer, TemplateMatcher
from coderca.inference import MockLlm
from coderca.report import load_corpus, load_issues


@pytest.fixture
def mr(fixtures):
    base = fixtures / "mr2953"
    return (extract_project(base / "src", base / "proto"), load_issues(base / "issue.json")[0],
            load_corpus(base / "corpus.json"), MockLlm.from_file(base / "mock_script.json"))


def test_params_round_trip():
    est = RootCauseAnalyzer(max_depth=3, ranked_k=3)
    assert est.get_params()["max_depth"] == 3
    est.set_params(max_depth=1)
    twin = clone(est)
    assert twin.get_params() == est.get_params() and twin is not est
    assert TemplateMatcher(max_hops=4).get_params()["max_hops"] == 4


def test_not_fitted():
    with pytest.raises(NotFittedError):
        TemplateMatcher().predict(["x"])
    with pytest.raises(NotFittedError):
        ExampleSelector().predict([])
    with pytest.raises(NotFittedError):
        RootCauseAnalyzer(MockLlm()).predict([])


def test_input_validation(mr):
    facts, issue, corpus, llm = mr
    with pytest.raises(TypeError):
        TemplateMatcher().fit({"methods": {}})
    with pytest.raises(TypeError):
        ExampleSelector().fit([issue])
    with pytest.raises(ValueError):
        RootCauseAnalyzer().fit(facts, corpus)
    with pytest.raises(TypeError):
        TemplateMatcher().fit(facts).predict([3])


def test_template_matcher(mr):
    facts, issue, _, _ = mr
    tm = TemplateMatcher().fit(facts)
    assert tm.templates_
    results = tm.predict(issue.log_lines)
    assert results[-1] is None
    assert any(r and "staging area" in r.template.text for r in results)
    texts = tm.transform(issue.log_lines)
    assert texts[-1] == "" and len(texts) == len(issue.log_lines)
    (attribution,) = tm.attribute(issue)
    assert attribution.points


def test_example_selector(mr):
    _, issue, corpus, _ = mr
    ids = ExampleSelector(n_examples=3).fit(corpus).predict(issue)
    assert len(ids) == 1 and len(ids[0]) == 3 and issue.id not in ids[0]


def test_root_cause_analyzer(mr):
    facts, issue, corpus, llm = mr
    est = RootCauseAnalyzer(llm).fit(facts, corpus)
    (d,) = est.predict([issue])
    assert d.primary_components == ("ClientRMService",)
    truth = next(ex.ground_truth for ex in corpus if ex.id == issue.id)
    assert est.score([issue], [truth]) == 1.0
