"""Exception types shared across alertlab."""

from __future__ import annotations


class AlertLabError(Exception):
    """Base class for every error raised by alertlab itself."""


class ParseError(AlertLabError):
    """Malformed input file. ``line`` is 1-based, or None when not applicable."""

    def __init__(self, message: str, path: str | None = None, line: int | None = None):
        self.path = path
        self.line = line
        where = ""
        if path is not None:
            where = f"{path}:"
        if line is not None:
            where += f"{line}:"
        super().__init__(f"{where} {message}" if where else message)


class GridError(ParseError):
    """Samples that do not sit on a regular scrape grid."""


class ScheduleOverlap(AlertLabError):
    pass


class NonPositiveInterval(AlertLabError):
    pass


class MetricMismatch(AlertLabError):
    def __init__(self, rule_name: str, metric: str, detail: str = "no series with that name"):
        self.rule_name = rule_name
        self.metric = metric
        super().__init__(f"rule {rule_name!r}: metric {metric!r}: {detail}")


class UnsortedInput(AlertLabError):
    pass


class ValidationError(AlertLabError):
    """Aggregated spec validation failure.

    ``errors`` is a list of ``(field_path, message)`` pairs, one per problem found.
    """

    def __init__(self, errors: list[tuple[str, str]]):
        self.errors = list(errors)
        lines = [f"{path or '<root>'}: {msg}" for path, msg in self.errors]
        super().__init__("invalid experiment spec:\n  " + "\n  ".join(lines))


class PipelineError(AlertLabError):
    """An error raised inside ``run_experiment``, tagged with the stage that failed."""

    def __init__(self, stage: str, cause: BaseException):
        self.stage = stage
        self.cause = cause
        super().__init__(f"[{stage}] {type(cause).__name__}: {cause}")
