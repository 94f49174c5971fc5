from __future__ import annotations

from enum import StrEnum


# Not a closed enum, new error codes can and will be added as needed
class ErrorCode(StrEnum):
    INPUT_INVALID = "input.invalid"
    INPUT_NOT_FOUND = "input.not_found"
    DOCUMENT_SCHEMA = "document.schema"
    PARSE_SOLOMON = "parse.solomon"
    PROBLEM_MALFORMED = "problem.malformed"
    CAPABILITY_EXCEEDED = "capability.exceeded"
    MODEL_INFEASIBLE = "model.infeasible"
    SOLVER_NO_SOLUTION = "solver.no_solution"
    SOLVER_NUMERICAL = "solver.numerical"
    DECODE_ROUTE = "decode.route"
    STATE_PREFIX = "state.prefix"
    STITCH_MISMATCH = "stitch.mismatch"
    RESULT_INVALID = "result.invalid"


DEFAULT_EXIT_CODE: dict[ErrorCode, int] = {
    ErrorCode.INPUT_INVALID: 1,
    ErrorCode.INPUT_NOT_FOUND: 1,
    ErrorCode.DOCUMENT_SCHEMA: 1,
    ErrorCode.PARSE_SOLOMON: 1,
    ErrorCode.PROBLEM_MALFORMED: 1,
    ErrorCode.CAPABILITY_EXCEEDED: 1,
    ErrorCode.MODEL_INFEASIBLE: 3,
    ErrorCode.SOLVER_NO_SOLUTION: 3,
    ErrorCode.SOLVER_NUMERICAL: 3,
    ErrorCode.DECODE_ROUTE: 1,
    ErrorCode.STATE_PREFIX: 1,
    ErrorCode.STITCH_MISMATCH: 1,
    ErrorCode.RESULT_INVALID: 1,
}


class PdpsdError(Exception):
    """
    Base error for the planner. Every error carries a code that maps to a
    CLI exit code.
    """

    code: ErrorCode
    message: str

    def __init__(self, code: ErrorCode, message: str):
        super().__init__(message)
        self.code = code
        self.message = message
        self.exit_code = DEFAULT_EXIT_CODE.get(code, 1)


class InputError(PdpsdError):
    def __init__(self, message: str, *, code: ErrorCode = ErrorCode.INPUT_INVALID):
        super().__init__(code, message)


class DocumentError(PdpsdError):
    """Schema or cross-reference problems in a JSON document."""

    issues: list[tuple[str, str]]
    """(JSON path, rule) pairs, in document order."""

    def __init__(self, issues: list[tuple[str, str]]):
        self.issues = issues
        lines = [f"{path or '<root>'}: {rule}" for path, rule in issues]
        super().__init__(ErrorCode.DOCUMENT_SCHEMA, "; ".join(lines))


class SolomonParseError(PdpsdError):
    line: int | None

    def __init__(self, message: str, *, line: int | None = None):
        self.line = line
        prefix = f"line {line}: " if line is not None else ""
        super().__init__(ErrorCode.PARSE_SOLOMON, f"{prefix}{message}")


class ProblemError(PdpsdError):
    def __init__(self, message: str):
        super().__init__(ErrorCode.PROBLEM_MALFORMED, message)


class CapabilityError(PdpsdError):
    def __init__(self, message: str):
        super().__init__(ErrorCode.CAPABILITY_EXCEEDED, message)


class ModelInfeasibleError(PdpsdError):
    hints: list[str]
    """Structures that likely cause the infeasibility."""

    def __init__(self, message: str, *, hints: list[str] | None = None):
        self.hints = hints or []
        detail = f" ({'; '.join(self.hints)})" if self.hints else ""
        super().__init__(ErrorCode.MODEL_INFEASIBLE, f"{message}{detail}")


class NoSolutionError(PdpsdError):
    """The solver stopped at its time limit before finding any incumbent."""

    def __init__(self, message: str, *, gap: float | None = None):
        self.gap = gap
        super().__init__(ErrorCode.SOLVER_NO_SOLUTION, message)


class NumericalError(PdpsdError):
    """The simplex could not finish an LP it was given."""

    def __init__(self, message: str):
        super().__init__(ErrorCode.SOLVER_NUMERICAL, message)


class DecodeError(PdpsdError):
    def __init__(
        self, message: str, *, truck: int | None = None, scenario: str | None = None
    ):
        self.truck = truck
        self.scenario = scenario
        where = []
        if truck is not None:
            where.append(f"truck {truck}")
        if scenario is not None:
            where.append(f"scenario {scenario}")
        prefix = f"{', '.join(where)}: " if where else ""
        super().__init__(ErrorCode.DECODE_ROUTE, f"{prefix}{message}")


class StateError(PdpsdError):
    def __init__(self, message: str):
        super().__init__(ErrorCode.STATE_PREFIX, message)


class StitchError(PdpsdError):
    def __init__(self, message: str):
        super().__init__(ErrorCode.STITCH_MISMATCH, message)


class ResultValidationError(PdpsdError):
    violations: list[str]

    def __init__(self, violations: list[str]):
        self.violations = violations
        super().__init__(
            ErrorCode.RESULT_INVALID,
            "result failed re-validation: " + "; ".join(violations),
        )
