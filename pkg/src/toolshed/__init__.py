"""Toolshed: a vector knowledge base and retrieval pipeline for tool catalogs.

Stores enhanced tool documents (humanized name, description, argument
schema, synthetic questions, key topics) in a cosine-similarity index,
retrieves the top-k tools for a query through an intent-decomposition and
query-expansion pipeline with reciprocal rank fusion, and measures how
retrieval quality, token cost and modeled agent accuracy move across catalog
sizes and selection thresholds.
"""

from __future__ import annotations

__version__ = "0.1.0"

from .catalog import (
    GoldenRecord,
    ToolCall,
    ToolDefinition,
    ToolParameter,
    ValidationReport,
    parse_golden_dataset,
    parse_tool_catalog,
    serialize_golden_dataset,
    serialize_tool_catalog,
    validate_catalog,
)
from .documents import (
    ComposerConfig,
    EnhancedToolDocument,
    Enrichment,
    FixtureEnrichment,
    LlmEnrichment,
    NullEnrichment,
    build_documents,
    compose_document,
    enrich_tool,
    humanize_tool_name,
    parse_enrichment_fixture,
)
from .embeddings import (
    EmbeddingProvider,
    ProviderConfig,
    cosine_similarity,
    hashed_bow_embed,
)
from .engine import execute_query
from .errors import (
    ConfigurationError,
    ContractError,
    CurveError,
    DuplicateToolError,
    ParseError,
    PipelineError,
    ProviderError,
    SchemaError,
    StorageFormatError,
    ToolshedError,
)
from .fusion import (
    FinalSelection,
    FusionConfig,
    MAX_TOP_K,
    ToolProvenance,
    allocate_sub_top_k,
    combine_intents,
    dedupe,
    fuse_intent,
    rrf_fuse,
)
from .knowledge_base import (
    IndexEntry,
    RankedResult,
    ToolshedIndex,
    build_index,
    load_index,
    query_top_k,
    save_index,
    subset_index,
)
from .metrics import (
    AggregateScores,
    SubScores,
    aggregate_record,
    count_tokens,
    recall_at_k,
    score_tool_call,
    serialize_tool_for_prompt,
    weighted_accuracy,
)
from .pipeline import (
    CandidateSet,
    IntentPlan,
    QueryFixtures,
    QueryTransformer,
    TransformerConfig,
    VariationSet,
    parse_query_fixtures,
    retrieve_for_plan,
)
from .retriever import ToolshedRetriever
from .sweep import (
    SimpleAgentCurve,
    SweepCell,
    SweepResult,
    emit_grid,
    expected_agent_accuracy,
    run_retrieval_sweep,
)

__all__ = [
    "__version__",
    # catalog
    "ToolParameter",
    "ToolDefinition",
    "ToolCall",
    "GoldenRecord",
    "ValidationReport",
    "parse_tool_catalog",
    "serialize_tool_catalog",
    "parse_golden_dataset",
    "serialize_golden_dataset",
    "validate_catalog",
    # documents
    "ComposerConfig",
    "Enrichment",
    "EnhancedToolDocument",
    "NullEnrichment",
    "FixtureEnrichment",
    "LlmEnrichment",
    "humanize_tool_name",
    "enrich_tool",
    "compose_document",
    "build_documents",
    "parse_enrichment_fixture",
    # embeddings
    "ProviderConfig",
    "EmbeddingProvider",
    "hashed_bow_embed",
    "cosine_similarity",
    # knowledge base
    "ToolshedIndex",
    "IndexEntry",
    "RankedResult",
    "build_index",
    "query_top_k",
    "subset_index",
    "save_index",
    "load_index",
    # pipeline
    "TransformerConfig",
    "QueryTransformer",
    "QueryFixtures",
    "IntentPlan",
    "VariationSet",
    "CandidateSet",
    "parse_query_fixtures",
    "retrieve_for_plan",
    # fusion
    "FusionConfig",
    "FinalSelection",
    "ToolProvenance",
    "MAX_TOP_K",
    "rrf_fuse",
    "dedupe",
    "fuse_intent",
    "combine_intents",
    "allocate_sub_top_k",
    # engine / estimator
    "execute_query",
    "ToolshedRetriever",
    # metrics
    "SubScores",
    "AggregateScores",
    "recall_at_k",
    "score_tool_call",
    "weighted_accuracy",
    "aggregate_record",
    "count_tokens",
    "serialize_tool_for_prompt",
    # sweep
    "SweepCell",
    "SweepResult",
    "SimpleAgentCurve",
    "run_retrieval_sweep",
    "expected_agent_accuracy",
    "emit_grid",
    # errors
    "ToolshedError",
    "ParseError",
    "SchemaError",
    "ContractError",
    "ConfigurationError",
    "ProviderError",
    "PipelineError",
    "DuplicateToolError",
    "StorageFormatError",
    "CurveError",
]
