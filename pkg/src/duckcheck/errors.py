"""Exception types shared across the checker."""

from __future__ import annotations


class DuckError(Exception):
    """Base class for all checker errors."""


class ParseError(DuckError):
    def __init__(self, message: str, line: int = 0, col: int = 0, expected: tuple[str, ...] = ()):
        super().__init__(message)
        self.message = message
        self.line = line
        self.col = col
        self.expected = expected

    def __str__(self) -> str:
        loc = f"{self.line}:{self.col}: " if self.line else ""
        exp = f" (expected one of: {', '.join(self.expected)})" if self.expected else ""
        return f"{loc}{self.message}{exp}"


class WfError(DuckError):
    """Ill-formed formula, type, environment, or datatype definition."""

    def __init__(self, kind: str, message: str):
        super().__init__(f"{kind}: {message}")
        self.kind = kind  # unbound-variable | arity | sort | variance | marking
        self.message = message


class UnknownCtor(DuckError):
    pass


class DuplicateCtor(DuckError):
    pass


class UnknownAbbreviation(DuckError):
    pass


class ArityError(DuckError):
    pass


class CnfBlowup(DuckError):
    pass


class InstantiationBlowup(DuckError):
    pass


class SolverStartError(DuckError):
    pass


class SolverProtocolError(DuckError):
    pass


class TypeError_(DuckError):
    """A failed typing obligation, tagged with the rule that failed."""

    def __init__(self, rule: str, message: str, pos: tuple[int, int] | None = None,
                 clause: str | None = None, candidates: list[str] | None = None):
        super().__init__(f"[{rule}] {message}")
        self.rule = rule
        self.message = message
        self.pos = pos
        self.clause = clause
        self.candidates = candidates or []


class NoApplicableArrow(TypeError_):
    def __init__(self, message: str, pos=None, candidates=None):
        super().__init__("NoApplicableArrow", message, pos, candidates=candidates)


class AmbiguousApplication(TypeError_):
    def __init__(self, message: str, pos=None, candidates=None):
        super().__init__("AmbiguousApplication", message, pos, candidates=candidates)


class ElimFailure(DuckError):
    pass


class FuelExhausted(DuckError):
    """Internal recursion budget for subtyping tripped (used by the
    termination regression with the used-set guard disabled)."""


class SoundnessViolation(DuckError):
    pass
