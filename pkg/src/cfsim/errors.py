"""Exception hierarchy shared across the toolkit."""


class CfsimError(Exception):
    """Base class for all toolkit errors."""


class ManifestError(CfsimError):
    """Invalid sweep manifest, axis, or trial set."""


class LogParseError(CfsimError):
    """Malformed prediction log. Carries a 1-based line number when known."""

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class SeriesError(CfsimError):
    """Records cannot be joined into trial series."""


class MetricError(CfsimError):
    """Metric preconditions violated (bad k, empty input, mixed models)."""


class PatchDropError(CfsimError):
    """Invalid patch-drop spec or image geometry."""


class ReportError(CfsimError):
    """Report emission or comparison preconditions violated."""
