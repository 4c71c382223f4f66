import json
import socket
import subprocess
import sys

import pytest

from coderca.cli import main


@pytest.fixture
def mr(fixtures):
    return fixtures / "mr2953"


def run(*argv):
    return main([str(a) for a in argv])


def code_args(mr):
    return ["--source-dir", mr / "src", "--idl-dir", mr / "proto"]


def diagnose_args(mr, out, *extra):
    return ["diagnose", *code_args(mr), "--issue", mr / "issue.json", "--corpus", mr / "corpus.json",
            "--llm", "mock", "--mock-script", mr / "mock_script.json", "--output-dir", out, *extra]


def test_extract_and_templates(mr, tmp_path):
    assert run("extract", *code_args(mr), "--output-dir", tmp_path) == 0
    facts = json.loads((tmp_path / "facts.json").read_text())
    assert facts["schema_version"] == 1 and facts["idl_services"]
    assert run("templates", "--facts", tmp_path / "facts.json", "--output-dir", tmp_path) == 0
    lines = (tmp_path / "templates.jsonl").read_text().splitlines()
    assert any(json.loads(line)["tokens"] == ["Cleaning", "up", "the", "staging", "area", "<*>"] for line in lines)


def test_match_and_paths(mr, tmp_path):
    assert run("match", *code_args(mr), "--issue", mr / "issue.json", "--output-dir", tmp_path) == 0
    matches = json.loads((tmp_path / "matches.json").read_text())
    assert matches["issue_id"] == "MAPREDUCE-2953" and matches["points"]
    assert len(matches["unmatched"]) == 1
    dot = tmp_path / "graph.dot"
    assert run("paths", *code_args(mr), "--matches", tmp_path / "matches.json", "--output-dir", tmp_path,
               "--dot", dot) == 0
    paths = json.loads((tmp_path / "paths.json").read_text())
    assert paths["max_depth"] == 2 and {b["rpc"] for b in paths["rpc_bindings"]} == {"submitApplication", "getApplicationReport"}
    assert any(s["entry_reason"] == "rpc_hop" for p in paths["paths"] for s in p["steps"])
    assert dot.read_text().startswith("digraph")


def test_diagnose_happy_path(mr, tmp_path):
    timings = tmp_path / "t.json"
    assert run(*diagnose_args(mr, tmp_path / "out", "--timings", timings)) == 0
    d = json.loads((tmp_path / "out" / "diagnosis.json").read_text())
    assert d["primary_components"] == ["ClientRMService"]
    assert d["provenance"]["code_points"] and d["provenance"]["rpc_hops"] >= 1
    assert sorted(p.name for p in (tmp_path / "out").iterdir()) == ["diagnosis.json"]
    t = json.loads(timings.read_text())["MAPREDUCE-2953"]
    assert {"extract", "templates", "call_graph", "match", "paths", "index", "inference"} <= set(t)


def test_third_party_logs_only(mr, tmp_path):
    issue = tmp_path / "issue.json"
    issue.write_text(json.dumps({"id": "EXT-1", "title": "vendor crash", "logs": [
        "2020-01-01 00:00:00,000 ERROR [main] com.vendor.Thing: totally unrelated failure",
        "something else entirely"]}))
    assert run("match", *code_args(mr), "--issue", issue, "--output-dir", tmp_path) == 0
    doc = json.loads((tmp_path / "matches.json").read_text())
    assert doc["points"] == [] and len(doc["unmatched"]) == 2


def test_evaluate(mr, tmp_path):
    assert run(*diagnose_args(mr, tmp_path)) == 0
    assert run("evaluate", "--diagnoses", tmp_path / "diagnosis.json", "--corpus", mr / "corpus.json",
               "--output-dir", tmp_path) == 0
    card = json.loads((tmp_path / "scorecard.json").read_text())
    assert card["overall"]["exact_match"] == 1.0 and card["overall"]["n"] == 1


def test_evaluate_missing_ground_truth(mr, tmp_path, capsys):
    diag = tmp_path / "d.json"
    diag.write_text(json.dumps({"issue_id": "NOPE-1", "summary": "x", "ranked_components": ["A"],
                                "primary_components": ["A"]}))
    assert run("evaluate", "--diagnoses", diag, "--corpus", mr / "corpus.json", "--output-dir", tmp_path) == 2
    assert "MissingGroundTruth" in capsys.readouterr().err


def test_usage_errors(mr, tmp_path):
    assert run("diagnose", "--issue", mr / "issue.json") == 1  # neither source nor facts
    assert run("diagnose", *code_args(mr), "--facts", "f.json", "--issue", mr / "issue.json") == 1
    assert run(*diagnose_args(mr, tmp_path, "--max-depth", "4")) == 1
    with pytest.raises(SystemExit) as info:
        run("diagnose", "--bogus")
    assert info.value.code == 1
    with pytest.raises(SystemExit) as info:
        run("frobnicate")
    assert info.value.code == 1


def test_input_errors(mr, tmp_path):
    bad = tmp_path / "Broken.java"
    bad.write_text("class Broken { void f( { }")
    assert run("extract", "--source-dir", tmp_path, "--output-dir", tmp_path / "o") == 2
    assert run("templates", "--facts", tmp_path / "missing.json") == 2
    truncated = tmp_path / "facts.json"
    truncated.write_text('{"schema_version": 1, "meth')
    assert run("templates", "--facts", truncated) == 2


def _closed_port():
    with socket.socket() as s:
        s.bind(("127.0.0.1", 0))
        return s.getsockname()[1]


def test_llm_backend_error(mr, tmp_path):
    endpoint = f"http://127.0.0.1:{_closed_port()}/v1/chat/completions"
    args = [a for a in diagnose_args(mr, tmp_path) if a not in ("mock", "--mock-script", mr / "mock_script.json")]
    args = [*args[:args.index("--llm") + 1], "http", *args[args.index("--llm") + 1:]]
    assert run(*args, "--endpoint", endpoint, "--model", "m") == 3


def test_config_file_and_flag_override(mr, tmp_path):
    cfg = tmp_path / "run.json"
    cfg.write_text(json.dumps({"source_dir": str(mr / "src"), "idl_dir": str(mr / "proto"),
                               "corpus": str(mr / "corpus.json"), "max_depth": 1, "examples_n": 2,
                               "llm": {"backend": "mock", "mock_script": str(mr / "mock_script.json")}}))
    assert run("diagnose", "--config", cfg, "--issue", mr / "issue.json", "--output-dir", tmp_path / "a") == 0
    a = json.loads((tmp_path / "a" / "diagnosis.json").read_text())
    assert len(a["provenance"]["examples_used"]) == 2
    assert run("diagnose", "--config", cfg, "--issue", mr / "issue.json", "--examples-n", "4",
               "--output-dir", tmp_path / "b") == 0
    b = json.loads((tmp_path / "b" / "diagnosis.json").read_text())
    assert len(b["provenance"]["examples_used"]) == 4


def test_config_rejects_secrets_and_unknown_keys(mr, tmp_path):
    for doc in ({"llm": {"backend": "http", "api_key": "sk-123"}}, {"token": "t"}, {"colour": "blue"}):
        cfg = tmp_path / "c.json"
        cfg.write_text(json.dumps(doc))
        assert run("diagnose", "--config", cfg, *code_args(mr), "--issue", mr / "issue.json") == 1


def test_no_api_key_flag():
    with pytest.raises(SystemExit):
        run("diagnose", "--api-key", "secret")


def test_composition_equals_single_shot(mr, tmp_path):
    staged = tmp_path / "staged"
    assert run("extract", *code_args(mr), "--output-dir", staged) == 0
    facts = staged / "facts.json"
    assert run("templates", "--facts", facts, "--output-dir", staged) == 0
    assert run("match", "--facts", facts, "--templates", staged / "templates.jsonl", "--issue", mr / "issue.json",
               "--output-dir", staged) == 0
    assert run("paths", "--facts", facts, "--matches", staged / "matches.json", "--output-dir", staged) == 0
    assert run("diagnose", "--facts", facts, "--paths", staged / "paths.json", "--issue", mr / "issue.json",
               "--corpus", mr / "corpus.json", "--llm", "mock", "--mock-script", mr / "mock_script.json",
               "--output-dir", staged) == 0
    assert run(*diagnose_args(mr, tmp_path / "single")) == 0
    assert (staged / "diagnosis.json").read_text() == (tmp_path / "single" / "diagnosis.json").read_text()


def test_rerun_is_byte_identical(mr, tmp_path):
    def outputs(out):
        assert run("extract", *code_args(mr), "--output-dir", out) == 0
        assert run("templates", "--facts", out / "facts.json", "--output-dir", out) == 0
        assert run("match", "--facts", out / "facts.json", "--issue", mr / "issue.json", "--output-dir", out) == 0
        assert run("paths", "--facts", out / "facts.json", "--issue", mr / "issue.json", "--output-dir", out) == 0
        assert run(*diagnose_args(mr, out)) == 0
        return {p.name: p.read_bytes() for p in sorted(out.iterdir())}

    first = outputs(tmp_path / "one")
    second = outputs(tmp_path / "two")
    assert len(first) == 5 and first == second


def test_batch_diagnose(mr, tmp_path):
    issue = json.loads((mr / "issue.json").read_text())
    twin = dict(issue, id="MAPREDUCE-2953-b")
    batch = tmp_path / "batch.json"
    batch.write_text(json.dumps([issue, twin]))
    args = diagnose_args(mr, tmp_path, "--jobs", "2")
    args[args.index(mr / "issue.json")] = batch
    assert run(*args) == 0
    docs = json.loads((tmp_path / "diagnoses.json").read_text())
    assert [d["issue_id"] for d in docs] == ["MAPREDUCE-2953", "MAPREDUCE-2953-b"]


def test_console_script_entry(mr, tmp_path):
    proc = subprocess.run([sys.executable, "-m", "coderca.cli", "extract", *map(str, code_args(mr)),
                           "--output-dir", str(tmp_path)], capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert (tmp_path / "facts.json").exists()
