"""Exception types shared across the package."""

from __future__ import annotations


class ToolshedError(Exception):
    """Base class for every error raised by this package."""


class ParseError(ToolshedError):
    """A line of an input file could not be decoded or parsed.

    Carries the 1-based line number of the offending record so CLI users can
    jump straight to it.
    """

    def __init__(self, message: str, line_number: int) -> None:
        super().__init__(f"line {line_number}: {message}")
        self.line_number = line_number


class SchemaError(ToolshedError):
    """A record parsed but violates the expected field schema."""

    def __init__(self, message: str, line_number: int | None = None) -> None:
        if line_number is not None:
            message = f"line {line_number}: {message}"
        super().__init__(message)
        self.line_number = line_number


class ContractError(ToolshedError, ValueError):
    """A caller violated a function's input contract."""


class ConfigurationError(ToolshedError):
    """A configuration value is out of range or inconsistent."""


class ProviderError(ToolshedError):
    """A remote embedding or completion provider failed.

    ``attempts`` records how many requests were made before giving up and
    ``retryable`` whether another attempt could plausibly succeed.
    """

    def __init__(self, message: str, attempts: int = 1, retryable: bool = False) -> None:
        super().__init__(message)
        self.attempts = attempts
        self.retryable = retryable


class PipelineError(ToolshedError):
    """A query-transformation step produced unusable output.

    ``raw_output`` preserves the model text that failed to parse so it can be
    inspected or logged.
    """

    def __init__(self, message: str, raw_output: str | None = None) -> None:
        super().__init__(message)
        self.raw_output = raw_output


class DuplicateToolError(ToolshedError):
    """An index build received two documents for the same tool name."""

    def __init__(self, tool_name: str) -> None:
        super().__init__(f"duplicate tool name in index build: {tool_name!r}")
        self.tool_name = tool_name


class StorageFormatError(ToolshedError):
    """A persisted binary file (index or cache) is corrupt or incompatible.

    ``offset`` is the byte position at which reading failed.
    """

    def __init__(self, message: str, offset: int | None = None) -> None:
        if offset is not None:
            message = f"{message} (at byte offset {offset})"
        super().__init__(message)
        self.offset = offset


class CurveError(ToolshedError):
    """An accuracy-curve lookup fell outside the curve's domain."""
