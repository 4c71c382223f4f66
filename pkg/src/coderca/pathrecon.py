"""Call graph with RPC bridging, and execution paths between code points."""

from __future__ import annotations

import warnings
from collections import defaultdict
from dataclasses import dataclass, field

from .codefacts.ir import CallEdge, CodeFacts, EdgeKind, IdlService, MethodDecl
from .errors import AmbiguousImplementation
from .logsource.attribution import CodePoint

DEFAULT_MAX_DEPTH = 2
DEFAULT_MAX_PATHS_PER_SEGMENT = 5

CODE_POINT = "code_point"
STATIC_CALL = "static_call"
RPC_HOP = "rpc_hop"


@dataclass
class CallGraph:
    nodes: frozenset[str]
    edges: list[CallEdge] = field(default_factory=list)
    unresolved: list[tuple[str, str]] = field(default_factory=list)
    superseded: frozenset[tuple[str, str, int]] = frozenset()
    unbridged: list[tuple[str, str]] = field(default_factory=list)

    def __post_init__(self):
        self._succ = None

    def successors(self, sig: str) -> list[tuple[str, str, int]]:
        """Traversable ``(callee, reason, call_site_line)`` out of ``sig``.

        Superseded stub edges are skipped; parallel edges to the same callee
        collapse to one, preferring the bridged kind, then the lowest line.
        """
        if self._succ is None:
            best: dict[tuple[str, str], tuple[str, int]] = {}
            for e in self.edges:
                if e.key in self.superseded:
                    continue
                reason = RPC_HOP if e.kind is EdgeKind.RPC_BRIDGED else STATIC_CALL
                cur = best.get((e.caller, e.callee))
                cand = (reason, e.call_site_line)
                if cur is None or (cand[0] == RPC_HOP, -cand[1]) > (cur[0] == RPC_HOP, -cur[1]):
                    best[(e.caller, e.callee)] = cand
            succ = defaultdict(list)
            for (caller, callee), (reason, line) in sorted(best.items()):
                succ[caller].append((callee, reason, line))
            self._succ = succ
        return self._succ.get(sig, [])

    def static_edges(self) -> list[CallEdge]:
        return [e for e in self.edges if e.kind is EdgeKind.STATIC]

    def bridged_edges(self) -> list[CallEdge]:
        return [e for e in self.edges if e.kind is EdgeKind.RPC_BRIDGED]


def build_call_graph(facts: CodeFacts) -> CallGraph:
    nodes = frozenset(facts.methods)
    edges, unresolved = [], []
    for e in facts.call_edges:
        if e.kind is not EdgeKind.STATIC:
            continue
        if e.resolved and e.caller in nodes and e.callee in nodes:
            edges.append(e)
        else:
            unresolved.append((e.caller, e.callee))
    return CallGraph(nodes, edges, unresolved)


# -- RPC bridging -----------------------------------------------------------------------


@dataclass(frozen=True)
class RpcBinding:
    service: IdlService
    rpc_name: str
    client_call_edge: CallEdge
    server_impl_signature: str
    impl_class: str


def _simple(name: str) -> str:
    return name.rsplit(".", 1)[-1]


def declares_service(method: MethodDecl, service: IdlService) -> bool:
    """Whether the method's class declares it implements ``service``'s interface."""
    wanted = {service.service_name, service.service_name + "ImplBase"}
    return any(_simple(i) in wanted for i in method.implemented_interfaces_of_class)


def implementation_classes(facts: CodeFacts, service: IdlService) -> dict[str, list[MethodDecl]]:
    """Classes named like the service (substring) that also declare its interface."""
    by_class: dict[str, list[MethodDecl]] = defaultdict(list)
    for m in facts.methods.values():
        if m.is_interface_method or service.service_name not in m.simple_class_name:
            continue
        if declares_service(m, service):
            by_class[m.class_name].append(m)
    return dict(sorted(by_class.items()))


def bridge_rpcs(graph: CallGraph, facts: CodeFacts) -> tuple[CallGraph, list[RpcBinding]]:
    """Add client-to-server edges for RPC stub calls declared in the IDL services.

    The stub edge stays in ``edges`` but is marked superseded for traversal.
    """
    bindings: list[RpcBinding] = []
    added: list[CallEdge] = []
    superseded = set(graph.superseded)
    unbridged = list(graph.unbridged)
    impls = {s.service_name: implementation_classes(facts, s) for s in facts.idl_services}
    warned = set()
    existing = {e.key for e in graph.edges}
    for edge in graph.static_edges():
        callee = facts.methods.get(edge.callee)
        if callee is None:
            continue
        for service in facts.idl_services:
            if callee.name not in service.rpc_names or service.service_name not in callee.simple_class_name:
                continue
            candidates = impls[service.service_name]
            if callee.class_name in candidates:
                continue  # a direct call on the implementation, not a stub
            if not candidates:
                unbridged.append((edge.caller, edge.callee))
                continue
            if len(candidates) > 1 and service.service_name not in warned:
                warned.add(service.service_name)
                warnings.warn(AmbiguousImplementation(service.service_name, list(candidates)), stacklevel=2)
            for impl_class, methods in candidates.items():
                named = [m for m in methods if m.name == callee.name]
                same_arity = [m for m in named if len(m.params) == len(callee.params)]
                for target in same_arity or named:
                    if target.signature == edge.caller:
                        continue
                    bridged = CallEdge(edge.caller, target.signature, EdgeKind.RPC_BRIDGED, edge.call_site_line)
                    if bridged.key not in existing:
                        existing.add(bridged.key)
                        added.append(bridged)
                    bindings.append(RpcBinding(service, callee.name, edge, target.signature, impl_class))
                    superseded.add(edge.key)
    patched = CallGraph(graph.nodes, list(graph.edges) + added, list(graph.unresolved), frozenset(superseded),
                        unbridged)
    return patched, bindings


def graph_to_dot(graph: CallGraph) -> str:
    """DOT rendering; bridged edges dashed, superseded stub edges dotted."""
    lines = ["digraph callgraph {", "  node [shape=box];"]
    for n in sorted(graph.nodes):
        lines.append(f'  "{n}";')
    for e in graph.edges:
        style = ""
        if e.kind is EdgeKind.RPC_BRIDGED:
            style = ' [style=dashed, label="rpc"]'
        elif e.key in graph.superseded:
            style = " [style=dotted]"
        lines.append(f'  "{e.caller}" -> "{e.callee}"{style};')
    lines.append("}")
    return "\n".join(lines) + "\n"


# -- execution paths -----------------------------------------------------------------------


@dataclass(frozen=True)
class PathStep:
    signature: str
    entry_reason: str
    call_site_line: int | None = None


@dataclass(frozen=True)
class ExecutionPath:
    steps: tuple[PathStep, ...]
    anchors: tuple[CodePoint, CodePoint]
    depth_used: int
    taken_branches: tuple[tuple[str, int, bool], ...] = ()
    linked: bool = True
    segment: int = 0

    @property
    def signatures(self) -> tuple[str, ...]:
        return tuple(s.signature for s in self.steps)

    @property
    def has_rpc(self) -> bool:
        return any(s.entry_reason == RPC_HOP for s in self.steps)

    def render(self) -> str:
        if not self.linked:
            return f"{self.steps[0].signature} ... {self.steps[-1].signature}  (unlinked)"
        out = self.steps[0].signature
        for s in self.steps[1:]:
            out += (" =RPC=> " if s.entry_reason == RPC_HOP else " -> ") + s.signature
        return out

    def to_json(self) -> dict:
        return {
            "segment": self.segment,
            "linked": self.linked,
            "depth_used": self.depth_used,
            "steps": [{"signature": s.signature, "entry_reason": s.entry_reason, "call_site_line": s.call_site_line}
                      for s in self.steps],
            "anchors": [a.to_json() for a in self.anchors],
            "taken_branches": [[sig, i, t] for sig, i, t in self.taken_branches],
        }

    @classmethod
    def from_json(cls, d: dict) -> "ExecutionPath":
        return cls(
            tuple(PathStep(s["signature"], s["entry_reason"], s.get("call_site_line")) for s in d["steps"]),
            tuple(CodePoint.from_json(a) for a in d["anchors"]),
            int(d["depth_used"]),
            tuple((sig, int(i), bool(t)) for sig, i, t in d.get("taken_branches", [])),
            bool(d.get("linked", True)),
            int(d.get("segment", 0)),
        )


def enumerate_paths(graph: CallGraph, src: str, dst: str, max_depth: int) -> list[list[tuple[str, str, int | None]]]:
    """Acyclic routes src→dst of at most ``max_depth`` invocation hops."""
    found = []
    route = [(src, CODE_POINT, None)]
    on_route = {src}

    def dfs(node: str) -> None:
        if len(route) - 1 >= max_depth:
            return
        for callee, reason, line in graph.successors(node):
            if callee in on_route:
                continue
            route.append((callee, reason, line))
            if callee == dst:
                found.append(list(route))
            else:
                on_route.add(callee)
                dfs(callee)
                on_route.discard(callee)
            route.pop()

    dfs(src)
    return found


def _branches(point: CodePoint) -> list[tuple[str, int, bool]]:
    return [(point.method_signature, i, t) for i, t in point.branch_path]


def _merge_branches(*groups) -> tuple[tuple[str, int, bool], ...]:
    seen = {}
    for group in groups:
        for sig, i, t in group:
            seen.setdefault((sig, i), t)
    return tuple((sig, i, t) for (sig, i), t in seen.items())


def reconstruct_paths(graph: CallGraph, facts: CodeFacts | None, points, max_depth: int = DEFAULT_MAX_DEPTH,
                      max_paths_per_segment: int | None = DEFAULT_MAX_PATHS_PER_SEGMENT) -> list[ExecutionPath]:
    """Connect each consecutive pair of code points with bounded-depth call paths.

    Segments with no route within ``max_depth`` produce one unlinked two-step
    path so neither anchor is lost. Within a segment paths are ordered by hop
    count, then RPC-bearing first, then by signatures.
    """
    if max_depth < 1:
        raise ValueError("max_depth must be at least 1")
    points = list(points)
    if facts is not None:
        points = [p for p in points if p.method_signature in facts.methods]
    if len(points) == 1:
        p = points[0]
        return [ExecutionPath((PathStep(p.method_signature, CODE_POINT),), (p, p), 0, _merge_branches(_branches(p)))]
    paths: list[ExecutionPath] = []
    for seg, (a, b) in enumerate(zip(points, points[1:])):
        anchors = (a, b)
        branches = _merge_branches(_branches(a), _branches(b))
        if a.method_signature == b.method_signature:
            paths.append(ExecutionPath((PathStep(a.method_signature, CODE_POINT),), anchors, 0, branches, True, seg))
            continue
        routes = enumerate_paths(graph, a.method_signature, b.method_signature, max_depth)
        if not routes:
            steps = (PathStep(a.method_signature, CODE_POINT), PathStep(b.method_signature, CODE_POINT))
            paths.append(ExecutionPath(steps, anchors, 0, branches, False, seg))
            continue
        routes.sort(key=lambda r: (len(r), not any(x[1] == RPC_HOP for x in r), [x[0] for x in r]))
        if max_paths_per_segment is not None:
            routes = routes[:max_paths_per_segment]
        for r in routes:
            steps = tuple(PathStep(sig, reason, line) for sig, reason, line in r)
            paths.append(ExecutionPath(steps, anchors, len(r) - 1, branches, True, seg))
    return paths
