"""Hypothesis strategies for generated code facts."""

from hypothesis import strategies as st

from coderca.codefacts import (
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
)

NAMES = st.sampled_from(["a", "msg", "nodeId", "x_1", "getValue", "run", "é"])
TEXT = st.text(max_size=10)
LINES = st.integers(min_value=0, max_value=5000)


def _compound(inner):
    return st.one_of(
        st.builds(Concat, inner, inner),
        st.builds(Call, NAMES, st.lists(inner, max_size=2).map(tuple), st.one_of(st.none(), inner), LINES),
        st.builds(Other, TEXT, st.lists(inner, max_size=2).map(tuple), st.booleans()),
    )


# Layered rather than st.recursive: bounded depth without rejected draws.
_LEAF = st.one_of(st.builds(StrLit, TEXT), st.builds(VarRef, NAMES), st.builds(Other, TEXT))
_LEVEL1 = st.one_of(_LEAF, _compound(_LEAF))
_EXPR = st.one_of(_LEAF, _compound(_LEVEL1))


def exprs():
    return _EXPR


_SIMPLE = st.one_of(
    st.builds(Assign, NAMES, _EXPR, LINES),
    st.builds(Decl, NAMES, NAMES, st.one_of(st.none(), _EXPR), LINES),
    st.builds(LogCall, st.sampled_from(["info", "warn", "error", "debug", "trace", "fatal"]), _EXPR, LINES),
    st.builds(Invoke, NAMES, st.lists(_EXPR, max_size=2).map(tuple), st.one_of(st.none(), _LEVEL1), LINES),
    st.builds(Return, st.one_of(st.none(), _EXPR), LINES),
)


def _if(inner):
    return st.builds(If, _LEVEL1, st.lists(inner, max_size=2).map(tuple), st.lists(inner, max_size=2).map(tuple),
                     LINES, st.integers(0, 20))


_STMT = st.one_of(_SIMPLE, _if(st.one_of(_SIMPLE, _if(_SIMPLE))))


def statements():
    return _STMT


@st.composite
def methods(draw, class_name):
    name = draw(NAMES)
    params = tuple(draw(st.lists(st.tuples(st.sampled_from(["String", "int", "long", "Path"]), NAMES), max_size=3)))
    sig = f"{class_name}.{name}({','.join(t for t, _ in params)})"
    start = draw(st.integers(1, 1000))
    return MethodDecl(
        signature=sig,
        class_name=class_name,
        name=name,
        file=class_name.replace(".", "/") + ".java",
        line_span=(start, start + draw(st.integers(0, 200))),
        body=tuple(draw(st.lists(statements(), max_size=4))),
        params=params,
        return_type=draw(st.sampled_from(["void", "String", "int"])),
        doc_comment=draw(st.one_of(st.none(), TEXT)),
        is_interface_method=draw(st.booleans()),
        implemented_interfaces_of_class=tuple(draw(st.lists(NAMES, max_size=2))),
    )


@st.composite
def code_facts(draw):
    classes = draw(st.lists(st.sampled_from(["p.A", "p.q.B", "r.Cee", "Top"]), max_size=3, unique=True))
    ms = {}
    for c in classes:
        for m in draw(st.lists(methods(c), max_size=3)):
            ms.setdefault(m.signature, m)
    sigs = sorted(ms)
    edges = []
    if sigs:
        for _ in range(draw(st.integers(0, 5))):
            caller = draw(st.sampled_from(sigs))
            if draw(st.booleans()):
                edges.append(CallEdge(caller, draw(st.sampled_from(sigs)), EdgeKind.STATIC, draw(LINES)))
            else:
                edges.append(CallEdge(caller, draw(NAMES) + "/1", EdgeKind.STATIC, draw(LINES), resolved=False))
    services = draw(st.lists(
        st.builds(IdlService, NAMES,
                  st.lists(st.builds(RpcMethod, NAMES, NAMES, NAMES), max_size=3, unique_by=lambda r: r.name)
                  .map(tuple), TEXT),
        max_size=2))
    return CodeFacts.build(ms, edges, services, draw(TEXT))
