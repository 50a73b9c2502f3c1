"""Exception hierarchy shared across the package.

All validation failures derive from PipelineError so the CLI can map them to
exit code 1, while OS-level failures keep their builtin types (exit code 2).
"""


class PipelineError(Exception):
    """Base class for all neckstrain validation and processing errors."""


class FilterDesignError(PipelineError):
    """Invalid filter design request (cutoffs, order, sample rate)."""


class SignalError(PipelineError):
    """Invalid signal content or incompatible signal parameters."""


class StreamFormatError(PipelineError):
    """Malformed sensor stream content (CSV frames, headers, timestamps)."""

    def __init__(self, reason: str, line_no: int | None = None, path: str | None = None):
        self.reason = reason
        self.line_no = line_no
        self.path = path
        where = ""
        if path is not None:
            where += f" in {path}"
        if line_no is not None:
            where += f" at line {line_no}"
        super().__init__(f"{reason}{where}")


class GeneratorError(PipelineError):
    """Invalid synthetic-session script or generator parameters."""


class ModelError(PipelineError):
    """Invalid model specification, training input, or model file."""


class ConfigError(PipelineError):
    """Invalid configuration file content."""
