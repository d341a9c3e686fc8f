"""Enhanced tool documents: the text that actually gets embedded.

A tool's code-level name is rarely what a user types, so each indexed
document starts with a humanized rendering of the name, followed by the
description, the argument schema, and optional synthetic questions and key
topics. The raw name survives only in metadata so that retrieval results can
be mapped back to the callable tool.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from typing import Any, Mapping

from .catalog import ToolDefinition, _iter_records
from .errors import ConfigurationError, SchemaError
from .llm import CompletionFn, parse_listed_lines, render_prompt
from .prompts import load_default_template

MAX_ENRICHMENT_COUNT = 10

# Boundary between an acronym run and a following capitalized word ("NPVTool"),
# then the ordinary lower/digit-to-upper boundary ("GetRecord", "get2Records").
_ACRONYM_BOUNDARY = re.compile(r"([A-Z]+)([A-Z][a-z])")
_CASE_BOUNDARY = re.compile(r"([a-z0-9])([A-Z])")


def humanize_tool_name(name: str) -> str:
    """Split a code-level tool name into space-separated words.

    Underscores and dashes become spaces, camel-case boundaries are split,
    and runs of consecutive capitals are kept together as acronyms. Original
    character case is preserved, so the result of a previous call passes
    through unchanged.
    """
    words: list[str] = []
    for chunk in re.split(r"[_\-\s]+", name):
        if not chunk:
            continue
        chunk = _ACRONYM_BOUNDARY.sub(r"\1 \2", chunk)
        chunk = _CASE_BOUNDARY.sub(r"\1 \2", chunk)
        words.extend(part for part in chunk.split(" ") if part)
    return " ".join(words)


@dataclass(frozen=True)
class ComposerConfig:
    """Which document components to include and how many of each."""

    include_schema: bool = True
    question_count: int = 0
    topic_count: int = 0

    def __post_init__(self) -> None:
        for label, count in (("question_count", self.question_count), ("topic_count", self.topic_count)):
            if not 0 <= count <= MAX_ENRICHMENT_COUNT:
                raise ConfigurationError(
                    f"{label} must be between 0 and {MAX_ENRICHMENT_COUNT}, got {count}"
                )


@dataclass(frozen=True)
class Enrichment:
    """Synthetic questions and key topics generated for one tool."""

    synthetic_questions: tuple[str, ...] = ()
    key_topics: tuple[str, ...] = ()


@dataclass(frozen=True)
class EnhancedToolDocument:
    """One indexable document: embeddable text plus routing metadata."""

    embeddable_text: str
    humanized_name: str
    metadata: Mapping[str, Any] = field(default_factory=dict)

    @property
    def tool_name(self) -> str:
        return str(self.metadata["tool_name"])


class NullEnrichment:
    """Generates nothing; documents carry only name, description and schema."""

    mode = "null"

    def generate(self, tool: ToolDefinition, question_count: int, topic_count: int) -> Enrichment:
        return Enrichment()


class FixtureEnrichment:
    """Serves questions and topics from a pre-built per-tool table."""

    mode = "fixture"

    def __init__(self, table: Mapping[str, tuple[list[str], list[str]]]) -> None:
        self._table = dict(table)

    def generate(self, tool: ToolDefinition, question_count: int, topic_count: int) -> Enrichment:
        if tool.name not in self._table:
            raise ConfigurationError(f"enrichment fixture has no entry for tool {tool.name!r}")
        questions, topics = self._table[tool.name]
        return Enrichment(tuple(questions), tuple(topics))


class LlmEnrichment:
    """Generates questions first, then topics conditioned on those questions."""

    mode = "llm"

    def __init__(
        self,
        complete: CompletionFn,
        question_template: str | None = None,
        topic_template: str | None = None,
    ) -> None:
        self._complete = complete
        self._question_template = question_template or load_default_template("synthetic_questions")
        self._topic_template = topic_template or load_default_template("key_topics")

    def generate(self, tool: ToolDefinition, question_count: int, topic_count: int) -> Enrichment:
        questions: list[str] = []
        if question_count > 0:
            prompt = render_prompt(
                self._question_template,
                {
                    "question_count": question_count,
                    "tool_name": tool.name,
                    "tool_description": tool.description,
                    "example_questions": "",
                },
            )
            questions = parse_listed_lines(self._complete(prompt))
        topics: list[str] = []
        if topic_count > 0:
            prompt = render_prompt(
                self._topic_template,
                {
                    "topic_count": topic_count,
                    "tool_name": tool.name,
                    "tool_description": tool.description,
                    "example_questions": "\n".join(questions),
                },
            )
            topics = parse_listed_lines(self._complete(prompt))
        return Enrichment(tuple(questions), tuple(topics))


def _dedupe_nonempty(items: tuple[str, ...], limit: int) -> tuple[str, ...]:
    seen: set[str] = set()
    kept: list[str] = []
    for item in items:
        if item and item not in seen:
            seen.add(item)
            kept.append(item)
        if len(kept) == limit:
            break
    return tuple(kept)


def enrich_tool(tool: ToolDefinition, source, config: ComposerConfig) -> Enrichment:
    """Produce up to the configured number of questions and topics for a tool.

    Entries are deduplicated and trimmed of empties before truncation; a
    generator that yields fewer usable entries than requested simply results
    in a shorter enrichment (nothing is invented to pad the gap).
    """
    raw = source.generate(tool, config.question_count, config.topic_count)
    return Enrichment(
        synthetic_questions=_dedupe_nonempty(raw.synthetic_questions, config.question_count),
        key_topics=_dedupe_nonempty(raw.key_topics, config.topic_count),
    )


def compose_document(
    tool: ToolDefinition,
    enrichment: Enrichment,
    config: ComposerConfig,
    extra_metadata: Mapping[str, Any] | None = None,
) -> EnhancedToolDocument:
    """Assemble the newline-joined embeddable text for one tool.

    Component order is fixed: humanized name, description, one
    ``name: description`` line per parameter (when schema is included), then
    synthetic questions and key topics. With enrichment disabled and schema
    on, a document with more components is always a string extension of the
    smaller configuration, which keeps ablation comparisons honest.
    """
    humanized = humanize_tool_name(tool.name)
    lines = [humanized, tool.description]
    if config.include_schema:
        lines.extend(f"{p.name}: {p.description}" for p in tool.parameters)
    lines.extend(enrichment.synthetic_questions[: config.question_count])
    lines.extend(enrichment.key_topics[: config.topic_count])
    metadata: dict[str, Any] = {"tool_name": tool.name}
    if extra_metadata:
        metadata.update(extra_metadata)
        metadata["tool_name"] = tool.name  # the code-level name is not overridable
    return EnhancedToolDocument(
        embeddable_text="\n".join(lines),
        humanized_name=humanized,
        metadata=metadata,
    )


def parse_enrichment_fixture(raw: bytes | str) -> dict[str, tuple[list[str], list[str]]]:
    """Parse a line-delimited enrichment fixture file.

    Each record: ``{"tool_name": ..., "questions": [...], "topics": [...]}``.
    """
    table: dict[str, tuple[list[str], list[str]]] = {}
    for line_number, record in _iter_records(raw):
        tool_name = record.get("tool_name")
        if not isinstance(tool_name, str) or not tool_name:
            raise SchemaError("enrichment record needs a non-empty tool_name", line_number)
        questions = record.get("questions", [])
        topics = record.get("topics", [])
        if not isinstance(questions, list) or not all(isinstance(q, str) for q in questions):
            raise SchemaError("questions must be a list of strings", line_number)
        if not isinstance(topics, list) or not all(isinstance(t, str) for t in topics):
            raise SchemaError("topics must be a list of strings", line_number)
        table[tool_name] = (questions, topics)
    return table


def build_documents(
    tools: list[ToolDefinition],
    config: ComposerConfig,
    source=None,
) -> list[EnhancedToolDocument]:
    """Compose documents for a whole catalog with one enrichment source."""
    if source is None:
        source = NullEnrichment()
    documents = []
    for tool in tools:
        enrichment = enrich_tool(tool, source, config)
        documents.append(compose_document(tool, enrichment, config))
    return documents


def composer_identity(config: ComposerConfig) -> str:
    """Stable string identifying a composer configuration, for fingerprints."""
    return json.dumps(
        {
            "include_schema": config.include_schema,
            "question_count": config.question_count,
            "topic_count": config.topic_count,
        },
        sort_keys=True,
    )
