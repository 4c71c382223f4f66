import random
import warnings

import pytest

from coderca.codefacts import CallEdge, EdgeKind, extract_project
from coderca.errors import AmbiguousImplementation
from coderca.logsource import CodePoint
from coderca.pathrecon import (
    CODE_POINT,
    RPC_HOP,
    STATIC_CALL,
    CallGraph,
    ExecutionPath,
    bridge_rpcs,
    build_call_graph,
    graph_to_dot,
    reconstruct_paths,
)

from oracles import exhaustive_paths, random_graph


def as_set(paths):
    return {tuple((s.signature, s.entry_reason) for s in p.steps) for p in paths if p.linked}


def test_paths_match_exhaustive_oracle():
    rng = random.Random(7)
    for _ in range(40):
        nodes, graph, kinds = random_graph(rng, rng.randint(2, 9), density=0.4)
        a, b = rng.sample(nodes, 2)
        points = [CodePoint(a, 1, "log"), CodePoint(b, 1, "log")]
        for depth in (1, 2, 3):
            got = reconstruct_paths(graph, None, points, depth, None)
            expected = exhaustive_paths(nodes, kinds, a, b, depth)
            if expected:
                assert as_set(got) == expected
                assert all(p.depth_used == len(p.steps) - 1 <= depth for p in got)
            else:
                assert len(got) == 1 and not got[0].linked


def test_ordering_and_cap():
    rng = random.Random(11)
    for _ in range(30):
        nodes, graph, kinds = random_graph(rng, 8)
        a, b = rng.sample(nodes, 2)
        points = [CodePoint(a, 1, "log"), CodePoint(b, 1, "log")]
        full = reconstruct_paths(graph, None, points, 3, None)
        capped = reconstruct_paths(graph, None, points, 3, 5)
        assert capped == full[:5]
        keys = [(len(p.steps), not p.has_rpc, p.signatures) for p in full]
        assert keys == sorted(keys)


def test_chain_of_points_and_unlinked():
    edges = [CallEdge("a()", "b()", EdgeKind.STATIC, 3)]
    graph = CallGraph(frozenset({"a()", "b()", "c()"}), edges)
    pts = [CodePoint("a()", 1, "log"), CodePoint("b()", 5, "log"), CodePoint("c()", 9, "stack_frame")]
    paths = reconstruct_paths(graph, None, pts)
    assert [(p.segment, p.linked) for p in paths] == [(0, True), (1, False)]
    assert paths[0].steps[1].call_site_line == 3
    assert paths[1].render() == "b() ... c()  (unlinked)"


def test_single_point_and_same_method():
    graph = CallGraph(frozenset({"a()"}), [])
    p = CodePoint("a()", 2, "log", ((0, True),))
    (only,) = reconstruct_paths(graph, None, [p])
    assert only.signatures == ("a()",) and only.taken_branches == (("a()", 0, True),)
    (same,) = reconstruct_paths(graph, None, [p, CodePoint("a()", 4, "log")])
    assert same.linked and same.signatures == ("a()",)
    assert reconstruct_paths(graph, None, []) == []
    with pytest.raises(ValueError):
        reconstruct_paths(graph, None, [p], max_depth=0)


def test_path_json_roundtrip():
    edges = [CallEdge("a()", "b()", EdgeKind.RPC_BRIDGED, 3)]
    graph = CallGraph(frozenset({"a()", "b()"}), edges)
    paths = reconstruct_paths(graph, None, [CodePoint("a()", 1, "log", ((2, False),)), CodePoint("b()", 5, "log")])
    assert [ExecutionPath.from_json(p.to_json()) for p in paths] == paths
    assert paths[0].render() == "a() =RPC=> b()"


# -- RPC bridging -----------------------------------------------------------------------------


def test_resourcetrack_bridging(fixtures):
    facts = extract_project(fixtures / "resourcetrack" / "src")
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        graph, bindings = bridge_rpcs(build_call_graph(facts), facts)
    (binding,) = bindings
    (edge,) = graph.bridged_edges()
    client = "org.apache.hadoop.yarn.server.nodemanager.NodeStatusUpdater.registerWithRM(String)"
    server = "org.apache.hadoop.yarn.server.resourcemanager.ResourceTrackService.registerNode(RegisterNodeRequest)"
    assert (edge.caller, edge.callee) == (client, server)
    assert binding.impl_class.endswith("ResourceTrackService") and binding.rpc_name == "registerNode"
    # the bridged edge keeps the stub call site, and the stub edge stays but is not traversed
    assert edge.call_site_line == binding.client_call_edge.call_site_line
    assert binding.client_call_edge in graph.edges and binding.client_call_edge.key in graph.superseded
    assert all(e.caller in graph.nodes and e.callee in graph.nodes for e in graph.edges)
    assert "ResourceTrackMetrics" not in " ".join(e.callee for e in graph.bridged_edges())


def test_rpc_hop_in_the_middle(fixtures):
    facts = extract_project(fixtures / "resourcetrack" / "src")
    graph, _ = bridge_rpcs(build_call_graph(facts), facts)
    client = "org.apache.hadoop.yarn.server.nodemanager.NodeStatusUpdater.registerWithRM(String)"
    admit = "org.apache.hadoop.yarn.server.resourcemanager.ResourceTrackService.admit(String)"
    paths = reconstruct_paths(graph, facts, [CodePoint(client, 11, "log"), CodePoint(admit, 16, "log")])
    (path,) = paths
    assert [s.entry_reason for s in path.steps] == [CODE_POINT, RPC_HOP, STATIC_CALL]
    # depth 1 is not enough to cross client -> server -> helper
    (short,) = reconstruct_paths(graph, facts, paths[0].anchors, max_depth=1)
    assert not short.linked


def test_ambiguous_implementation_warns(fixtures, tmp_path):
    src = fixtures / "resourcetrack" / "src"
    for f in src.iterdir():
        (tmp_path / f.name).write_text(f.read_text())
    (tmp_path / "ResourceTrackServiceV2.java").write_text(
        "package org.apache.hadoop.yarn.server.resourcemanager;\n"
        "import org.apache.hadoop.yarn.server.api.ResourceTrack;\n"
        "public class ResourceTrackServiceV2 implements ResourceTrack {\n"
        " public RegisterNodeResponse registerNode(RegisterNodeRequest request) {\n  return null;\n }\n}\n")
    facts = extract_project(tmp_path)
    with pytest.warns(AmbiguousImplementation):
        graph, bindings = bridge_rpcs(build_call_graph(facts), facts)
    assert len(bindings) == 2 and len(graph.bridged_edges()) == 2


def test_dot_export(fixtures):
    facts = extract_project(fixtures / "resourcetrack" / "src")
    graph, _ = bridge_rpcs(build_call_graph(facts), facts)
    dot = graph_to_dot(graph)
    assert dot.startswith("digraph") and "style=dashed" in dot and "style=dotted" in dot
