"""Tool catalog and golden dataset records, with line-delimited JSON parsing.

The canonical interchange formats are line-delimited JSON (one record per
line, UTF-8). Blank lines and lines starting with ``#`` are skipped, and all
parse or schema failures carry the 1-based line number of the bad record.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Any, Iterable, Mapping

from .errors import ParseError, SchemaError

VALUE_TYPES = frozenset({"string", "number", "integer", "boolean", "array", "object"})
TRACE_TYPES = frozenset({"single", "parallel", "sequential"})


@dataclass(frozen=True)
class ToolParameter:
    """One argument of a tool's calling schema."""

    name: str
    description: str
    value_type: str
    required: bool


@dataclass(frozen=True)
class ToolDefinition:
    """A callable tool as it appears in a provider catalog."""

    name: str
    description: str
    parameters: tuple[ToolParameter, ...] = ()
    extra: Mapping[str, Any] = field(default_factory=dict, compare=False)


@dataclass(frozen=True)
class ToolCall:
    """A single invocation: tool name plus its argument mapping.

    ``arguments`` preserves insertion order, which matters when diffing a
    predicted call against a golden one.
    """

    tool_name: str
    arguments: Mapping[str, Any] = field(default_factory=dict)


@dataclass(frozen=True)
class GoldenRecord:
    """One evaluation query with its expected tool calls."""

    query_id: str
    query_text: str
    trace_type: str
    expected_calls: tuple[ToolCall, ...]
    extra: Mapping[str, Any] = field(default_factory=dict, compare=False)

    def expected_tool_names(self) -> list[str]:
        return [call.tool_name for call in self.expected_calls]


@dataclass(frozen=True)
class Finding:
    """One problem discovered by catalog validation."""

    kind: str
    tool_name: str
    detail: str


@dataclass(frozen=True)
class ValidationReport:
    """Result of validating a catalog; empty means the catalog is clean."""

    findings: tuple[Finding, ...]

    def __bool__(self) -> bool:
        return bool(self.findings)

    def summary_lines(self) -> list[str]:
        return [f"{f.kind}: {f.tool_name}: {f.detail}" for f in self.findings]


def _iter_records(raw: bytes | str) -> Iterable[tuple[int, dict]]:
    """Yield (line_number, parsed object) for each non-blank, non-comment line."""
    if isinstance(raw, bytes):
        try:
            text = raw.decode("utf-8")
        except UnicodeDecodeError as exc:
            raise ParseError(f"not valid UTF-8: {exc}", 1) from exc
    else:
        text = raw
    for line_number, line in enumerate(text.splitlines(), start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        try:
            record = json.loads(stripped)
        except json.JSONDecodeError as exc:
            raise ParseError(f"invalid JSON: {exc.msg}", line_number) from exc
        if not isinstance(record, dict):
            raise SchemaError("record is not a JSON object", line_number)
        yield line_number, record


def _require(record: dict, key: str, line_number: int) -> Any:
    if key not in record:
        raise SchemaError(f"missing required field {key!r}", line_number)
    return record[key]


def _parse_parameter(obj: Any, line_number: int) -> ToolParameter:
    if not isinstance(obj, dict):
        raise SchemaError("parameter entry is not an object", line_number)
    name = _require(obj, "name", line_number)
    value_type = _require(obj, "type", line_number)
    if not isinstance(name, str):
        raise SchemaError("parameter name must be a string", line_number)
    if value_type not in VALUE_TYPES:
        raise SchemaError(
            f"unknown parameter type {value_type!r} (expected one of {sorted(VALUE_TYPES)})",
            line_number,
        )
    description = obj.get("description", "")
    if not isinstance(description, str):
        raise SchemaError("parameter description must be a string", line_number)
    return ToolParameter(
        name=name,
        description=description,
        value_type=value_type,
        required=bool(obj.get("required", False)),
    )


def parse_tool_catalog(raw: bytes | str) -> list[ToolDefinition]:
    """Parse a line-delimited tool catalog.

    Each record looks like::

        {"name": ..., "description": ...,
         "parameters": [{"name", "description", "type", "required"}, ...]}

    Structural problems (missing fields, bad types) raise :class:`SchemaError`
    with the line number; malformed JSON raises :class:`ParseError`. Semantic
    problems such as duplicate names are left to :func:`validate_catalog` so
    that they can be reported rather than aborting the parse.
    """
    tools: list[ToolDefinition] = []
    for line_number, record in _iter_records(raw):
        name = _require(record, "name", line_number)
        description = _require(record, "description", line_number)
        if not isinstance(name, str):
            raise SchemaError("tool name must be a string", line_number)
        if not isinstance(description, str):
            raise SchemaError("tool description must be a string", line_number)
        raw_params = record.get("parameters", [])
        if not isinstance(raw_params, list):
            raise SchemaError("parameters must be a list", line_number)
        parameters = tuple(_parse_parameter(p, line_number) for p in raw_params)
        extra = {
            k: v
            for k, v in record.items()
            if k not in ("name", "description", "parameters")
        }
        tools.append(
            ToolDefinition(
                name=name, description=description, parameters=parameters, extra=extra
            )
        )
    return tools


def serialize_tool_catalog(tools: Iterable[ToolDefinition]) -> bytes:
    """Inverse of :func:`parse_tool_catalog`; round-trips structurally."""
    lines = []
    for tool in tools:
        record: dict[str, Any] = {
            "name": tool.name,
            "description": tool.description,
            "parameters": [
                {
                    "name": p.name,
                    "description": p.description,
                    "type": p.value_type,
                    "required": p.required,
                }
                for p in tool.parameters
            ],
        }
        record.update(tool.extra)
        lines.append(json.dumps(record, ensure_ascii=False))
    return ("\n".join(lines) + "\n").encode("utf-8") if lines else b""


def parse_golden_dataset(raw: bytes | str) -> list[GoldenRecord]:
    """Parse a line-delimited golden dataset.

    Each record carries ``query_id``, ``query``, ``trace_type`` and a
    non-empty ``expected_calls`` list. ``trace_type`` must be ``single``
    exactly when there is one expected call.
    """
    records: list[GoldenRecord] = []
    for line_number, record in _iter_records(raw):
        query_id = _require(record, "query_id", line_number)
        query = _require(record, "query", line_number)
        trace_type = _require(record, "trace_type", line_number)
        raw_calls = _require(record, "expected_calls", line_number)
        if not isinstance(query_id, str) or not isinstance(query, str):
            raise SchemaError("query_id and query must be strings", line_number)
        if trace_type not in TRACE_TYPES:
            raise SchemaError(
                f"unknown trace_type {trace_type!r} (expected one of {sorted(TRACE_TYPES)})",
                line_number,
            )
        if not isinstance(raw_calls, list) or not raw_calls:
            raise SchemaError("expected_calls must be a non-empty list", line_number)
        calls = []
        for obj in raw_calls:
            if not isinstance(obj, dict):
                raise SchemaError("expected_calls entries must be objects", line_number)
            tool_name = _require(obj, "tool_name", line_number)
            if not isinstance(tool_name, str):
                raise SchemaError("tool_name must be a string", line_number)
            arguments = obj.get("arguments", {})
            if not isinstance(arguments, dict):
                raise SchemaError("arguments must be an object", line_number)
            calls.append(ToolCall(tool_name=tool_name, arguments=arguments))
        if (trace_type == "single") != (len(calls) == 1):
            raise SchemaError(
                f"trace_type {trace_type!r} inconsistent with {len(calls)} expected call(s)",
                line_number,
            )
        extra = {
            k: v
            for k, v in record.items()
            if k not in ("query_id", "query", "trace_type", "expected_calls")
        }
        records.append(
            GoldenRecord(
                query_id=query_id,
                query_text=query,
                trace_type=trace_type,
                expected_calls=tuple(calls),
                extra=extra,
            )
        )
    return records


def serialize_golden_dataset(records: Iterable[GoldenRecord]) -> bytes:
    """Inverse of :func:`parse_golden_dataset`."""
    lines = []
    for record in records:
        obj: dict[str, Any] = {
            "query_id": record.query_id,
            "query": record.query_text,
            "trace_type": record.trace_type,
            "expected_calls": [
                {"tool_name": call.tool_name, "arguments": dict(call.arguments)}
                for call in record.expected_calls
            ],
        }
        obj.update(record.extra)
        lines.append(json.dumps(obj, ensure_ascii=False))
    return ("\n".join(lines) + "\n").encode("utf-8") if lines else b""


def validate_catalog(tools: Iterable[ToolDefinition]) -> ValidationReport:
    """Check semantic invariants over a parsed catalog.

    Reports duplicate tool names, names that are empty or contain whitespace,
    empty descriptions, and duplicate parameter names within a tool. An empty
    report means the catalog is safe to index.
    """
    findings: list[Finding] = []
    seen: dict[str, int] = {}
    for tool in tools:
        if not tool.name or tool.name != tool.name.strip() or any(c.isspace() for c in tool.name):
            findings.append(
                Finding("invalid_name", tool.name, "tool names must be non-empty with no whitespace")
            )
        if tool.name in seen:
            findings.append(
                Finding("duplicate_name", tool.name, f"also defined at position {seen[tool.name]}")
            )
        else:
            seen[tool.name] = len(seen)
        if not tool.description.strip():
            findings.append(Finding("empty_description", tool.name, "description is empty"))
        param_seen: set[str] = set()
        for param in tool.parameters:
            if param.name in param_seen:
                findings.append(
                    Finding("duplicate_parameter", tool.name, f"parameter {param.name!r} repeats")
                )
            param_seen.add(param.name)
    return ValidationReport(findings=tuple(findings))
