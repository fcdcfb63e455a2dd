"""Exception hierarchy shared across the toolkit."""

from __future__ import annotations

from dataclasses import dataclass


class CamoError(Exception):
    """Base class for domain errors; the CLI maps these to exit code 1."""


class ValidationError(CamoError):
    def __init__(self, violations, context: str = ""):
        self.violations = list(violations)
        head = f"{context}: " if context else ""
        lines = "; ".join(str(v) for v in self.violations[:5])
        more = f" (+{len(self.violations) - 5} more)" if len(self.violations) > 5 else ""
        super().__init__(f"{head}invalid IR: {lines}{more}")


@dataclass(frozen=True)
class SourceSpan:
    line: int
    column: int
    length: int = 1

    def __post_init__(self) -> None:
        if self.line < 1 or self.column < 1:
            raise ValueError("line and column are 1-based")

    def __str__(self) -> str:
        return f"{self.line}:{self.column}"


class ParseError(CamoError):
    def __init__(self, span: SourceSpan, message: str, expected: str | None = None):
        if not message:
            raise ValueError("ParseError needs a message")
        self.span = span
        self.message = message
        self.expected = expected
        super().__init__(f"line {span.line}, column {span.column}: {message}")


class UnsupportedConstruct(ParseError):
    """Valid LLVM that lies outside the supported subset."""

    def __init__(self, span: SourceSpan, construct: str):
        self.construct = construct
        super().__init__(span, f"unsupported construct: {construct}")


class ArgMismatch(CamoError):
    pass


class UnsupportedParamType(CamoError):
    pass


class UnknownFunction(CamoError):
    pass


class SignatureMismatch(CamoError):
    pass


class PassError(CamoError):
    def __init__(self, pass_name: str, function: str, cause: Exception):
        self.pass_name = pass_name
        self.function = function
        self.cause = cause
        super().__init__(f"pass {pass_name!r} failed on @{function}: {cause}")


class FlattenUnsupported(CamoError):
    pass
