"""Parser for the Java-like source subset documented in GRAMMAR.md.

Anything outside the subset raises :class:`SourceSyntaxError`; nothing is
skipped silently.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field

from ..errors import DuplicateSignature, SourceSyntaxError
from .ir import (
    Assign,
    Call,
    CallEdge,
    CodeFacts,
    Concat,
    Decl,
    EdgeKind,
    If,
    Invoke,
    LogCall,
    MethodDecl,
    Other,
    Return,
    StrLit,
    VarRef,
    iter_calls,
    iter_statements,
)

LOGGER_NAMES = frozenset({"LOG", "LOGGER", "Log", "log", "logger"})
LOG_LEVELS = frozenset({"trace", "debug", "info", "warn", "error", "fatal"})
MODIFIERS = frozenset(
    {"public", "private", "protected", "static", "final", "abstract", "synchronized", "native", "default"}
)
KEYWORDS = frozenset(
    {"package", "import", "class", "interface", "implements", "extends", "if", "else", "return",
     "new", "null", "true", "false", "this", "instanceof", "throws", "void"}
) | MODIFIERS

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r\f]+)
  | (?P<nl>\n)
  | (?P<doc>/\*\*(?!/).*?\*/)
  | (?P<comment>/\*.*?\*/|//[^\n]*)
  | (?P<string>"(?:[^"\\\n]|\\.)*")
  | (?P<char>'(?:[^'\\\n]|\\.)')
  | (?P<number>\d+(?:\.\d+)?[lLfFdD]?)
  | (?P<ident>[A-Za-z_$][A-Za-z0-9_$]*)
  | (?P<op>==|!=|<=|>=|&&|\|\||\+=|[{}()\[\];,.=<>+\-*/%!@])
    """,
    re.S | re.X,
)

_ESCAPES = {"n": "\n", "t": "\t", "r": "\r", "b": "\b", "f": "\f", "0": "\0", '"': '"', "'": "'", "\\": "\\"}


@dataclass
class Token:
    kind: str  # ident | string | char | number | op | eof
    text: str
    line: int
    doc: str | None = None  # doc comment immediately before this token


def tokenize(path: str, text: str) -> list[Token]:
    toks: list[Token] = []
    pos, line = 0, 1
    pending_doc = None
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            if text[pos] == '"':
                raise SourceSyntaxError(path, line, "terminated string literal")
            raise SourceSyntaxError(path, line, "a token of the source subset", text[pos])
        kind = m.lastgroup
        val = m.group()
        if kind == "doc":
            pending_doc = val[3:-2].strip()
        elif kind in ("ident", "string", "char", "number", "op"):
            toks.append(Token(kind, val, line, pending_doc))
            pending_doc = None
        line += val.count("\n")
        pos = m.end()
    toks.append(Token("eof", "", line))
    return toks


def unescape(literal: str) -> str:
    body = literal[1:-1]
    out = []
    i = 0
    while i < len(body):
        c = body[i]
        if c == "\\":
            nxt = body[i + 1]
            if nxt == "u":
                out.append(chr(int(body[i + 2:i + 6], 16)))
                i += 6
                continue
            out.append(_ESCAPES.get(nxt, nxt))
            i += 2
            continue
        out.append(c)
        i += 1
    return "".join(out)


def escape(text: str) -> str:
    out = []
    for c in text:
        if c == "\\":
            out.append("\\\\")
        elif c == '"':
            out.append('\\"')
        elif c == "\n":
            out.append("\\n")
        elif c == "\t":
            out.append("\\t")
        elif c == "\r":
            out.append("\\r")
        elif ord(c) < 0x20:
            out.append(f"\\u{ord(c):04x}")
        else:
            out.append(c)
    return '"' + "".join(out) + '"'


# -- canonical rendering ----------------------------------------------------------


def render_expr(e) -> str:
    if isinstance(e, StrLit):
        return escape(e.text)
    if isinstance(e, VarRef):
        return e.name
    if isinstance(e, Concat):
        left = render_expr(e.left)
        if isinstance(e.left, Other) and e.left.compound:
            left = f"({left})"
        right = render_expr(e.right)
        if isinstance(e.right, Concat) or (isinstance(e.right, Other) and e.right.compound):
            right = f"({right})"
        return f"{left} + {right}"
    if isinstance(e, Call):
        args = ", ".join(render_expr(a) for a in e.args)
        if e.receiver is None:
            return f"{e.name}({args})"
        return f"{_operand(e.receiver)}.{e.name}({args})"
    if isinstance(e, Other):
        return e.text
    raise TypeError(f"not an expression: {e!r}")


def _operand(e) -> str:
    text = render_expr(e)
    if isinstance(e, Concat) or (isinstance(e, Other) and e.compound):
        return f"({text})"
    return text


def render_block(stmts, indent: int = 0) -> list[str]:
    pad = "    " * indent
    lines: list[str] = []
    for st in stmts:
        if isinstance(st, Assign):
            lines.append(f"{pad}{st.var} = {render_expr(st.value)};")
        elif isinstance(st, Decl):
            if st.value is None:
                lines.append(f"{pad}{st.type_name} {st.var};")
            else:
                lines.append(f"{pad}{st.type_name} {st.var} = {render_expr(st.value)};")
        elif isinstance(st, LogCall):
            lines.append(f"{pad}LOG.{st.level}({render_expr(st.message)});")
        elif isinstance(st, Invoke):
            lines.append(f"{pad}{render_expr(st.as_call())};")
        elif isinstance(st, Return):
            lines.append(f"{pad}return;" if st.value is None else f"{pad}return {render_expr(st.value)};")
        elif isinstance(st, If):
            lines.append(f"{pad}if ({render_expr(st.cond)}) {{")
            lines.extend(render_block(st.then, indent + 1))
            if st.orelse:
                lines.append(f"{pad}}} else {{")
                lines.extend(render_block(st.orelse, indent + 1))
            lines.append(f"{pad}}}")
        else:
            raise TypeError(f"not a statement: {st!r}")
    return lines


def render_method(m: MethodDecl) -> str:
    """Canonical source text for a method, used as the retrievable body."""
    out = []
    if m.doc_comment:
        out.append("/** " + m.doc_comment + " */")
    params = ", ".join(f"{t} {n}" for t, n in m.params)
    header = f"{m.return_type} {m.name}({params})" if m.return_type else f"{m.name}({params})"
    if m.is_interface_method:
        out.append(header + ";")
        return "\n".join(out)
    out.append(header + " {")
    out.extend(render_block(m.body, 1))
    out.append("}")
    return "\n".join(out)


# -- parser -------------------------------------------------------------------------


@dataclass
class _Class:
    fqn: str
    simple: str
    package: str
    is_interface: bool
    implements: list[str]
    imports: dict[str, str]
    fields: dict[str, str] = field(default_factory=dict)
    methods: list[MethodDecl] = field(default_factory=list)
    path: str = ""


class _Parser:
    def __init__(self, path: str, text: str):
        self.path = path
        self.toks = tokenize(path, text)
        self.pos = 0
        self.if_counter = 0

    # token helpers
    def peek(self, k: int = 0) -> Token:
        return self.toks[min(self.pos + k, len(self.toks) - 1)]

    def at(self, text: str, k: int = 0) -> bool:
        t = self.peek(k)
        return t.kind in ("op", "ident") and t.text == text

    def next(self) -> Token:
        t = self.toks[self.pos]
        if t.kind != "eof":
            self.pos += 1
        return t

    def fail(self, expected: str):
        t = self.peek()
        raise SourceSyntaxError(self.path, t.line, expected, t.text or "<eof>")

    def expect(self, text: str) -> Token:
        if not self.at(text):
            self.fail(repr(text))
        return self.next()

    def ident(self, what: str = "identifier") -> str:
        t = self.peek()
        if t.kind != "ident" or t.text in KEYWORDS:
            self.fail(what)
        return self.next().text

    def qname(self) -> str:
        parts = [self.ident("qualified name")]
        while self.at(".") and self.peek(1).kind == "ident" and self.peek(1).text not in KEYWORDS:
            self.next()
            parts.append(self.next().text)
        return ".".join(parts)

    # compilation unit
    def parse_file(self) -> list[_Class]:
        package = ""
        imports: dict[str, str] = {}
        if self.at("package"):
            self.next()
            package = self.qname()
            self.expect(";")
        while self.at("import"):
            self.next()
            if self.at("static"):
                self.next()
            name = self.qname()
            if self.at("."):
                self.next()
                self.expect("*")
            else:
                imports[name.rsplit(".", 1)[-1]] = name
            self.expect(";")
        classes = []
        while self.peek().kind != "eof":
            classes.append(self.parse_type(package, imports))
        return classes

    def skip_annotations_and_modifiers(self) -> None:
        while True:
            if self.at("@"):
                self.next()
                self.qname()
                if self.at("("):
                    self.fail("annotation without arguments")
            elif self.peek().kind == "ident" and self.peek().text in MODIFIERS:
                self.next()
            else:
                return

    def parse_type(self, package: str, imports: dict[str, str]) -> _Class:
        self.skip_annotations_and_modifiers()
        if self.at("class"):
            is_interface = False
        elif self.at("interface"):
            is_interface = True
        else:
            self.fail("'class' or 'interface'")
        self.next()
        name = self.ident("type name")
        implements: list[str] = []
        # interfaces list their super-interfaces with `extends`; classes use `implements`
        if self.at("implements" if not is_interface else "extends"):
            self.next()
            implements.append(self.qname())
            while self.at(","):
                self.next()
                implements.append(self.qname())
        fqn = f"{package}.{name}" if package else name
        cls = _Class(fqn, name, package, is_interface, implements, imports, path=self.path)
        self.expect("{")
        while not self.at("}"):
            if self.peek().kind == "eof":
                self.fail("'}'")
            self.parse_member(cls)
        self.expect("}")
        return cls

    def parse_type_ref(self) -> str:
        base = self.qname() if not self.at("void") else self.next().text
        if self.at("<"):
            self.next()
            args = [self.parse_type_ref()]
            while self.at(","):
                self.next()
                args.append(self.parse_type_ref())
            self.expect(">")
            base += "<" + ",".join(args) + ">"
        while self.at("[") and self.at("]", 1):
            self.next()
            self.next()
            base += "[]"
        return base

    def parse_member(self, cls: _Class) -> None:
        start = self.peek()
        doc = start.doc
        self.skip_annotations_and_modifiers()
        if self.at("class") or self.at("interface"):
            self.fail("member declaration (nested types are outside the subset)")
        if self.peek().kind == "ident" and self.peek().text == cls.simple and self.at("(", 1):
            return_type = ""
            name = self.next().text
        else:
            return_type = self.parse_type_ref()
            name = self.ident("member name")
        if not self.at("("):
            # field
            if return_type == "void":
                self.fail("field type")
            cls.fields[name] = return_type
            if self.at("="):
                self.next()
                self.parse_expr()
            self.expect(";")
            return
        self.expect("(")
        params: list[tuple[str, str]] = []
        if not self.at(")"):
            while True:
                self.skip_annotations_and_modifiers()
                ptype = self.parse_type_ref()
                params.append((ptype, self.ident("parameter name")))
                if not self.at(","):
                    break
                self.next()
        self.expect(")")
        if self.at("throws"):
            self.next()
            self.qname()
            while self.at(","):
                self.next()
                self.qname()
        self.if_counter = 0
        if self.at(";"):
            end = self.next().line
            body: tuple = ()
            abstract = True
        else:
            body, end = self.parse_block()
            abstract = False
        if cls.is_interface and not abstract:
            self.fail("';' (interface methods have no body)")
        if not cls.is_interface and abstract:
            raise SourceSyntaxError(self.path, start.line, "method body")
        sig = f"{cls.fqn}.{name}({','.join(t for t, _ in params)})"
        cls.methods.append(
            MethodDecl(
                signature=sig,
                class_name=cls.fqn,
                name=name,
                file=self.path,
                line_span=(start.line, end),
                body=body,
                params=tuple(params),
                return_type=return_type,
                doc_comment=doc,
                is_interface_method=cls.is_interface,
            )
        )

    # statements
    def parse_block(self) -> tuple[tuple, int]:
        self.expect("{")
        stmts = []
        while not self.at("}"):
            if self.peek().kind == "eof":
                self.fail("'}'")
            stmts.append(self.parse_statement())
        end = self.next().line
        return tuple(stmts), end

    def parse_body(self) -> tuple:
        if self.at("{"):
            return self.parse_block()[0]
        return (self.parse_statement(),)

    def looks_like_decl(self) -> bool:
        save = self.pos
        try:
            self.parse_type_ref()
            ok = self.peek().kind == "ident" and self.peek().text not in KEYWORDS and (
                self.at("=", 1) or self.at(";", 1)
            )
        except SourceSyntaxError:
            ok = False
        self.pos = save
        return ok

    def parse_statement(self):
        t = self.peek()
        line = t.line
        if self.at("if"):
            self.next()
            if_id = self.if_counter
            self.if_counter += 1
            self.expect("(")
            cond = self.parse_expr()
            self.expect(")")
            then = self.parse_body()
            orelse: tuple = ()
            if self.at("else"):
                self.next()
                orelse = self.parse_body()
            return If(cond, then, orelse, line, if_id)
        if self.at("return"):
            self.next()
            value = None if self.at(";") else self.parse_expr()
            self.expect(";")
            return Return(value, line)
        if t.kind == "ident" and t.text in LOGGER_NAMES and self.at(".", 1) and self.peek(2).text in LOG_LEVELS \
                and self.at("(", 3):
            level = self.peek(2).text
            self.pos += 4
            msg = self.parse_expr()
            if self.at(","):
                self.fail("')' (log calls take exactly one argument)")
            self.expect(")")
            self.expect(";")
            return LogCall(level, msg, line)
        if t.kind == "ident" and t.text not in KEYWORDS and (self.at("=", 1) or self.at("+=", 1)):
            var = self.next().text
            op = self.next().text
            value = self.parse_expr()
            self.expect(";")
            if op == "+=":
                value = Concat(VarRef(var), value)
            return Assign(var, value, line)
        if t.kind == "ident" and t.text not in KEYWORDS and self.looks_like_decl():
            type_name = self.parse_type_ref()
            var = self.ident("variable name")
            value = None
            if self.at("="):
                self.next()
                value = self.parse_expr()
            self.expect(";")
            return Decl(var, type_name, value, line)
        expr = self.parse_expr()
        if not isinstance(expr, Call):
            raise SourceSyntaxError(self.path, line, "statement (if, return, declaration, assignment, call)")
        self.expect(";")
        return Invoke(expr.name, expr.args, expr.receiver, expr.line)

    # expressions
    def parse_expr(self):
        return self._binary(0)

    _LEVELS = (("||",), ("&&",), ("==", "!="), ("<", ">", "<=", ">=", "instanceof"), ("+", "-"), ("*", "/", "%"))

    def _binary(self, level: int):
        if level == len(self._LEVELS):
            return self._unary()
        left = self._binary(level + 1)
        ops = self._LEVELS[level]
        while any(self.at(op) for op in ops):
            op = self.next().text
            if op == "instanceof":
                right = Other(self.parse_type_ref())
            else:
                right = self._binary(level + 1)
            if op == "+":
                left = Concat(left, right)
            else:
                left = Other(f"{_operand(left)} {op} {_operand(right)}", (left, right), True)
        return left

    def _unary(self):
        if self.at("!") or self.at("-"):
            op = self.next().text
            operand = self._unary()
            return Other(f"{op}{_operand(operand)}", (operand,))
        return self._postfix()

    def _args(self) -> tuple:
        self.expect("(")
        args = []
        if not self.at(")"):
            args.append(self.parse_expr())
            while self.at(","):
                self.next()
                args.append(self.parse_expr())
        self.expect(")")
        return tuple(args)

    def _postfix(self):
        expr = self._primary()
        while self.at("."):
            self.next()
            if self.at("class"):
                self.next()
                expr = Other(f"{_operand(expr)}.class", (expr,))
                continue
            name_tok = self.peek()
            name = self.ident("member name")
            if self.at("("):
                expr = Call(name, self._args(), expr, name_tok.line)
            elif isinstance(expr, Other) and expr.text == "this" and not expr.parts:
                expr = VarRef(name)
            else:
                expr = Other(f"{_operand(expr)}.{name}", (expr,))
        return expr

    def _primary(self):
        t = self.peek()
        if t.kind == "string":
            self.next()
            return StrLit(unescape(t.text))
        if t.kind in ("number", "char"):
            self.next()
            return Other(t.text)
        if t.kind == "ident" and t.text in ("null", "true", "false", "this"):
            self.next()
            return Other(t.text)
        if self.at("new"):
            self.next()
            type_name = self.qname()
            args = self._args()
            return Other(f"new {type_name}({', '.join(render_expr(a) for a in args)})", args)
        if self.at("("):
            self.next()
            inner = self.parse_expr()
            self.expect(")")
            return inner
        if t.kind == "ident" and t.text not in KEYWORDS:
            self.next()
            if self.at("("):
                return Call(t.text, self._args(), None, t.line)
            return VarRef(t.text)
        self.fail("expression")


def parse_source_file(path: str, text: str) -> list[_Class]:
    return _Parser(path, text).parse_file()


def _base_type(type_name: str) -> str:
    return type_name.split("<", 1)[0].rstrip("[]").rsplit(".", 1)[-1]


class _Resolver:
    def __init__(self, classes: list[_Class]):
        self.classes = {c.fqn: c for c in classes}
        self.by_simple: dict[str, list[_Class]] = {}
        for c in classes:
            self.by_simple.setdefault(c.simple, []).append(c)

    def lookup_class(self, simple: str, ctx: _Class) -> _Class | None:
        if simple in ctx.imports and ctx.imports[simple] in self.classes:
            return self.classes[ctx.imports[simple]]
        same_pkg = f"{ctx.package}.{simple}" if ctx.package else simple
        if same_pkg in self.classes:
            return self.classes[same_pkg]
        found = self.by_simple.get(simple, [])
        return found[0] if len(found) == 1 else None

    def qualify(self, name: str, ctx: _Class) -> str:
        if "." in name:
            return name
        cls = self.lookup_class(name, ctx)
        if cls is not None:
            return cls.fqn
        if name in ctx.imports:
            return ctx.imports[name]
        return f"{ctx.package}.{name}" if ctx.package else name

    @staticmethod
    def pick(cls: _Class, name: str, arity: int) -> MethodDecl | None:
        for m in cls.methods:
            if m.name == name and len(m.params) == arity:
                return m
        return None

    def resolve(self, call: Call, method: MethodDecl, ctx: _Class, scope: dict[str, str]) -> MethodDecl | None:
        arity = len(call.args)
        recv = call.receiver
        if recv is None or (isinstance(recv, Other) and recv.text == "this"):
            return self.pick(ctx, call.name, arity)
        if isinstance(recv, VarRef):
            if recv.name in scope:
                target = self.lookup_class(_base_type(scope[recv.name]), ctx)
            else:
                target = self.lookup_class(recv.name, ctx)
            return self.pick(target, call.name, arity) if target is not None else None
        # receiver is itself an expression: fall back to a project-wide unique match
        hits = [m for c in self.classes.values() for m in c.methods if m.name == call.name and len(m.params) == arity]
        return hits[0] if len(hits) == 1 else None


def _callee_text(call: Call) -> str:
    prefix = render_expr(call.receiver) + "." if call.receiver is not None else ""
    return f"{prefix}{call.name}/{len(call.args)}"


def _is_logger_call(call: Call) -> bool:
    return isinstance(call.receiver, VarRef) and call.receiver.name in LOGGER_NAMES


def parse_source_subset(files, idl_services=(), project_version: str = "") -> CodeFacts:
    """Parse ``(path, text)`` pairs into code facts with resolved static call edges."""
    classes: list[_Class] = []
    for path, text in files:
        classes.extend(parse_source_file(path, text))
    resolver = _Resolver(classes)
    seen_fqn = set()
    methods: dict[str, MethodDecl] = {}
    for cls in classes:
        if cls.fqn in seen_fqn:
            raise DuplicateSignature(cls.fqn)
        seen_fqn.add(cls.fqn)
        interfaces = tuple(resolver.qualify(i, cls) for i in cls.implements)
        resolved_methods = []
        for m in cls.methods:
            if m.signature in methods:
                raise DuplicateSignature(m.signature)
            m = MethodDecl(**{**m.__dict__, "implemented_interfaces_of_class": interfaces})
            methods[m.signature] = m
            resolved_methods.append(m)
        cls.methods = resolved_methods
    edges: list[CallEdge] = []
    for cls in classes:
        for m in cls.methods:
            scope = dict(cls.fields)
            scope.update({n: t for t, n in m.params})
            scope.update({st.var: st.type_name for st in iter_statements(m.body) if isinstance(st, Decl)})
            for call in iter_calls(m.body):
                if _is_logger_call(call):
                    continue
                target = resolver.resolve(call, m, cls, scope)
                if target is None:
                    edges.append(CallEdge(m.signature, _callee_text(call), EdgeKind.STATIC, call.line, resolved=False))
                else:
                    edges.append(CallEdge(m.signature, target.signature, EdgeKind.STATIC, call.line))
    return CodeFacts.build(methods, edges, idl_services, project_version)
