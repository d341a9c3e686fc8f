"""End-to-end retrieval for a single query.

Ties the pieces together: rewrite, decompose into intents, expand each
intent into variations, retrieve per variation, fuse within intents, and
combine across intents into the final shortlist. Every selected tool keeps
provenance describing which intent and variations produced it.
"""

from __future__ import annotations

from dataclasses import replace
from typing import Sequence

from .embeddings import EmbeddingProvider
from .fusion import (
    FinalSelection,
    FusionConfig,
    allocate_sub_top_k,
    combine_intents,
    fuse_intent,
    rrf_fuse,
)
from .knowledge_base import ToolshedIndex
from .llm import CompletionFn
from .pipeline import QueryTransformer, retrieve_for_plan


def execute_query(
    index: ToolshedIndex,
    provider: EmbeddingProvider,
    transformer: QueryTransformer,
    fusion_config: FusionConfig,
    query: str,
    history: Sequence[str] | None = None,
    complete: CompletionFn | None = None,
) -> FinalSelection:
    """Run the full pipeline for one query and return the final selection.

    With a single intent the per-intent budget equals final_top_k and the
    null-mode pipeline reduces exactly to plain top-k retrieval. With
    multiple intents the budget is split evenly (remainder to the earlier
    intents) and each variation retrieves to the deepest per-intent budget
    so fusion has enough candidates to fill every quota.
    """
    plan = transformer.plan(query, history)
    budgets = allocate_sub_top_k(fusion_config.final_top_k, len(plan.intents))
    per_variation_k = max(budgets)
    candidate_sets = retrieve_for_plan(
        index, plan, transformer, provider, per_variation_k=per_variation_k
    )
    per_intent_lists = [
        fuse_intent(candidate_set, fusion_config, budget, complete=complete)
        for candidate_set, budget in zip(candidate_sets, budgets)
    ]
    selection = combine_intents(per_intent_lists, fusion_config.final_top_k)
    # Enrich the combining provenance with fusion scores and the variations
    # that actually surfaced each tool.
    fused_scores = [
        {
            result.tool_name: result.score
            for result in rrf_fuse(candidate_set.name_lists(), fusion_config.rrf_constant)
        }
        for candidate_set in candidate_sets
    ]
    enriched = []
    for item in selection.provenance:
        candidate_set = candidate_sets[item.intent_index]
        variation_indices = tuple(
            idx
            for idx, results in enumerate(candidate_set.per_variation)
            if any(r.tool_name == item.tool_name for r in results)
        )
        enriched.append(
            replace(
                item,
                fused_score=fused_scores[item.intent_index].get(item.tool_name),
                variation_indices=variation_indices,
            )
        )
    return FinalSelection(tools=selection.tools, provenance=tuple(enriched))
