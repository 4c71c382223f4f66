"""Proto-subset IDL parsing: services and their rpc methods."""

from __future__ import annotations

import re

from ..errors import SourceSyntaxError
from .ir import IdlService, RpcMethod

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r\f]+)
  | (?P<nl>\n)
  | (?P<comment>/\*.*?\*/|//[^\n]*)
  | (?P<string>"(?:[^"\\\n]|\\.)*"|'(?:[^'\\\n]|\\.)*')
  | (?P<word>[A-Za-z_][A-Za-z0-9_.]*|-?\d[\w.]*)
  | (?P<op>[{}()\[\];,=<>])
    """,
    re.S | re.X,
)


def _tokenize(path: str, text: str) -> list[tuple[str, int]]:
    toks = []
    pos, line = 0, 1
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            raise SourceSyntaxError(path, line, "proto token", text[pos])
        if m.lastgroup in ("string", "word", "op"):
            toks.append((m.group(), line))
        line += m.group().count("\n")
        pos = m.end()
    return toks


class _ProtoParser:
    def __init__(self, path: str, text: str):
        self.path = path
        self.toks = _tokenize(path, text)
        self.pos = 0

    def peek(self) -> str:
        return self.toks[self.pos][0] if self.pos < len(self.toks) else ""

    def line(self) -> int:
        if self.pos < len(self.toks):
            return self.toks[self.pos][1]
        return self.toks[-1][1] if self.toks else 1

    def next(self) -> str:
        if self.pos >= len(self.toks):
            raise SourceSyntaxError(self.path, self.line(), "more input", "<eof>")
        tok = self.toks[self.pos][0]
        self.pos += 1
        return tok

    def expect(self, text: str) -> None:
        tok = self.peek()
        if tok != text:
            raise SourceSyntaxError(self.path, self.line(), repr(text), tok or "<eof>")
        self.pos += 1

    def name(self) -> str:
        tok = self.peek()
        if not tok or not (tok[0].isalpha() or tok[0] == "_"):
            raise SourceSyntaxError(self.path, self.line(), "identifier", tok or "<eof>")
        return self.next()

    def skip_statement(self) -> None:
        while self.next() != ";":
            pass

    def skip_braced(self) -> None:
        self.expect("{")
        depth = 1
        while depth:
            tok = self.next()
            depth += tok == "{"
            depth -= tok == "}"

    def parse(self) -> list[IdlService]:
        services = []
        while self.pos < len(self.toks):
            kw = self.peek()
            if kw in ("syntax", "package", "import", "option", "edition"):
                self.skip_statement()
            elif kw in ("message", "enum", "extend"):
                self.next()
                self.name()
                self.skip_braced()
            elif kw == "service":
                services.append(self.parse_service())
            elif kw == ";":
                self.next()
            else:
                raise SourceSyntaxError(self.path, self.line(), "top-level proto declaration", kw)
        return services

    def parse_service(self) -> IdlService:
        self.expect("service")
        name = self.name()
        self.expect("{")
        rpcs: list[RpcMethod] = []
        while self.peek() != "}":
            if self.peek() == "option":
                self.skip_statement()
                continue
            if self.peek() == ";":
                self.next()
                continue
            line = self.line()
            self.expect("rpc")
            rpc_name = self.name()
            request = self._message_ref()
            self.expect("returns")
            response = self._message_ref()
            if self.peek() == "{":
                self.skip_braced()
            else:
                self.expect(";")
            if any(r.name == rpc_name for r in rpcs):
                raise SourceSyntaxError(self.path, line, f"unique rpc name in service {name}", rpc_name)
            rpcs.append(RpcMethod(rpc_name, request, response))
        self.expect("}")
        return IdlService(name, tuple(rpcs), self.path)

    def _message_ref(self) -> str:
        self.expect("(")
        if self.peek() == "stream":
            self.next()
        ref = self.name()
        self.expect(")")
        return ref


def parse_idl(files) -> list[IdlService]:
    """Parse ``(path, text)`` proto files; one service per ``service`` block, in file order."""
    services: list[IdlService] = []
    for path, text in files:
        services.extend(_ProtoParser(path, text).parse())
    return services
