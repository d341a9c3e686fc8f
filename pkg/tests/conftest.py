"""Shared builders for test corpora.

Everything here is deterministic: corpora are built from explicit token
lists and providers run in offline mode, so tests never touch the network.
"""

from __future__ import annotations

import json

import pytest

from toolshed.catalog import GoldenRecord, ToolCall, ToolDefinition, ToolParameter
from toolshed.documents import ComposerConfig, build_documents
from toolshed.embeddings import EmbeddingProvider, ProviderConfig
from toolshed.knowledge_base import ToolshedIndex, build_index


def make_tool(
    name: str,
    description: str = "does a thing",
    params: list[tuple[str, str, str, bool]] | None = None,
) -> ToolDefinition:
    """Tool with parameters given as (name, description, type, required)."""
    parameters = tuple(
        ToolParameter(name=p[0], description=p[1], value_type=p[2], required=p[3])
        for p in (params or [])
    )
    return ToolDefinition(name=name, description=description, parameters=parameters)


def make_golden(
    query_id: str,
    query: str,
    calls: list[tuple[str, dict]],
) -> GoldenRecord:
    trace = "single" if len(calls) == 1 else "parallel"
    return GoldenRecord(
        query_id=query_id,
        query_text=query,
        trace_type=trace,
        expected_calls=tuple(ToolCall(tool_name=n, arguments=a) for n, a in calls),
    )


def offline_provider(dimension: int = 256, cache_path: str | None = None) -> EmbeddingProvider:
    return EmbeddingProvider(ProviderConfig(dimension=dimension, cache_path=cache_path))


def small_index(
    tools: list[ToolDefinition],
    dimension: int = 256,
) -> tuple[ToolshedIndex, EmbeddingProvider]:
    provider = offline_provider(dimension)
    documents = build_documents(tools, ComposerConfig())
    return build_index(documents, provider), provider


def catalog_lines(tools: list[dict]) -> bytes:
    return ("\n".join(json.dumps(t) for t in tools) + "\n").encode("utf-8")


@pytest.fixture
def three_tools() -> list[ToolDefinition]:
    return [
        make_tool("get_weather", "Current weather for a city", [("city", "city name", "string", True)]),
        make_tool("get_net_present_value", "Net present value of a cash flow series"),
        make_tool("search_flights", "Find flights between two airports"),
    ]
