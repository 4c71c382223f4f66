"""Exception types shared across the pipeline."""

from __future__ import annotations


class SourceSyntaxError(SyntaxError):
    """Input text falls outside the supported source or IDL subset."""

    def __init__(self, path: str, line: int, expected: str, found: str = ""):
        self.path = path
        self.line = line
        self.expected = expected
        self.found = found
        msg = f"{path}:{line}: expected {expected}"
        if found:
            msg += f", found {found!r}"
        super().__init__(msg)


class DuplicateSignature(ValueError):
    def __init__(self, signature: str):
        self.signature = signature
        super().__init__(f"duplicate method signature: {signature}")


class FormatError(ValueError):
    def __init__(self, offset: int, reason: str):
        self.offset = offset
        self.reason = reason
        super().__init__(f"malformed facts file at offset {offset}: {reason}")


class VersionMismatch(ValueError):
    def __init__(self, found, supported):
        self.found = found
        self.supported = supported
        super().__init__(f"unsupported schema_version {found!r} (supported: {supported})")


class RestorationDepthExceeded(RuntimeError):
    def __init__(self, signature: str, line: int, reason: str = "depth"):
        self.signature = signature
        self.line = line
        self.reason = reason
        super().__init__(f"restoration bound ({reason}) exceeded at {signature}:{line}")


class AmbiguousImplementation(UserWarning):
    """More than one implementation class survived RPC bridging filters."""

    def __init__(self, service: str, candidates: list[str]):
        self.service = service
        self.candidates = list(candidates)
        super().__init__(f"service {service} has {len(candidates)} implementations: {', '.join(candidates)}")


class LlmUnavailable(RuntimeError):
    def __init__(self, cause):
        self.cause = cause
        super().__init__(f"LLM backend unavailable: {cause}")


class MissingGroundTruth(KeyError):
    def __init__(self, issue_id: str):
        self.issue_id = issue_id
        super().__init__(issue_id)

    def __str__(self):
        return f"no ground truth for issue {self.issue_id!r}"
