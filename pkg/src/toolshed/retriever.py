"""Scikit-learn style facade over the retrieval stack.

``ToolshedRetriever`` follows the estimator protocol: construct with plain
parameters, ``fit`` on a tool catalog, then ``predict`` top-k tool names for
query strings. ``get_params``/``set_params``/``clone`` come from
``sklearn.base.BaseEstimator``, so the retriever drops into pipelines and
grid searches like any other estimator.
"""

from __future__ import annotations

import logging
from typing import Sequence

from sklearn.base import BaseEstimator

from .catalog import validate_catalog
from .documents import ComposerConfig, build_documents
from .embeddings import OFFLINE_MODE, EmbeddingProvider, ProviderConfig
from .engine import execute_query
from .errors import ContractError
from .fusion import FinalSelection, FusionConfig
from .knowledge_base import build_index
from .metrics import recall_at_k
from .pipeline import QueryFixtures, QueryTransformer, TransformerConfig
from .validation import check_fitted, check_queries, check_tools, check_top_k

logger = logging.getLogger(__name__)


class ToolshedRetriever(BaseEstimator):
    """Retrieves the top-k most relevant tools for natural-language queries.

    Parameters mirror the underlying configuration dataclasses; objects such
    as an enrichment source, fixture tables or a completion client are passed
    as parameters too, keeping ``fit`` signature-compatible with sklearn
    conventions.
    """

    def __init__(
        self,
        include_schema: bool = True,
        question_count: int = 0,
        topic_count: int = 0,
        embedding_mode: str = OFFLINE_MODE,
        dimension: int = 256,
        endpoint: str | None = None,
        model: str | None = None,
        api_key: str | None = None,
        cache_path: str | None = None,
        transform_mode: str = "null",
        variation_count: int = 3,
        rrf_constant: float = 60.0,
        reranker: str = "rrf",
        final_top_k: int = 5,
        enrichment_source=None,
        query_fixtures: QueryFixtures | None = None,
        complete=None,
    ) -> None:
        self.include_schema = include_schema
        self.question_count = question_count
        self.topic_count = topic_count
        self.embedding_mode = embedding_mode
        self.dimension = dimension
        self.endpoint = endpoint
        self.model = model
        self.api_key = api_key
        self.cache_path = cache_path
        self.transform_mode = transform_mode
        self.variation_count = variation_count
        self.rrf_constant = rrf_constant
        self.reranker = reranker
        self.final_top_k = final_top_k
        self.enrichment_source = enrichment_source
        self.query_fixtures = query_fixtures
        self.complete = complete

    def fit(self, X, y=None) -> "ToolshedRetriever":
        """Compose documents for the catalog ``X`` and build the index."""
        tools = check_tools(X)
        check_top_k(self.final_top_k)
        report = validate_catalog(tools)
        duplicates = [f for f in report.findings if f.kind == "duplicate_name"]
        if duplicates:
            raise ContractError(
                f"catalog has duplicate tool names: {[f.tool_name for f in duplicates]}"
            )
        for finding in report.findings:
            logger.warning("catalog finding: %s: %s (%s)", finding.kind, finding.tool_name, finding.detail)
        composer_config = ComposerConfig(
            include_schema=self.include_schema,
            question_count=self.question_count,
            topic_count=self.topic_count,
        )
        provider = EmbeddingProvider(
            ProviderConfig(
                mode=self.embedding_mode,
                dimension=self.dimension,
                endpoint=self.endpoint,
                model=self.model,
                api_key=self.api_key,
                cache_path=self.cache_path,
            )
        )
        documents = build_documents(tools, composer_config, self.enrichment_source)
        self.tools_ = tuple(tools)
        self.composer_config_ = composer_config
        self.provider_ = provider
        self.index_ = build_index(documents, provider)
        self.transformer_ = QueryTransformer(
            TransformerConfig(mode=self.transform_mode, variation_count=self.variation_count),
            fixtures=self.query_fixtures,
            complete=self.complete,
        )
        self.fusion_config_ = FusionConfig(
            rrf_constant=self.rrf_constant,
            reranker=self.reranker,
            final_top_k=self.final_top_k,
        )
        return self

    def retrieve(self, query: str, history: Sequence[str] | None = None) -> FinalSelection:
        """Full-provenance retrieval for a single query."""
        check_fitted(self, ["index_"])
        if not isinstance(query, str) or not query.strip():
            raise ContractError("query must be a non-empty string")
        return execute_query(
            self.index_,
            self.provider_,
            self.transformer_,
            self.fusion_config_,
            query,
            history=history,
            complete=self.complete,
        )

    def predict(self, X) -> list[list[str]]:
        """Top-k tool names for each query in ``X``."""
        check_fitted(self, ["index_"])
        return [list(self.retrieve(query).tools) for query in check_queries(X)]

    def score(self, X, y) -> float:
        """Mean recall@final_top_k of predictions against golden name sets."""
        check_fitted(self, ["index_"])
        queries = check_queries(X)
        golden_sets = list(y)
        if len(queries) != len(golden_sets):
            raise ContractError(
                f"X has {len(queries)} queries but y has {len(golden_sets)} golden sets"
            )
        predictions = self.predict(queries)
        recalls = [
            recall_at_k(predicted, golden, self.final_top_k)
            for predicted, golden in zip(predictions, golden_sets)
        ]
        return sum(recalls) / len(recalls)
