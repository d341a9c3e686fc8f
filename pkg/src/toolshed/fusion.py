"""Fusing per-variation result lists and combining per-intent selections.

Within an intent, the ranked lists produced by each query variation are
merged with reciprocal rank fusion. Across intents, the fused lists are
interleaved rank-major (every intent's best tool first, then every intent's
second-best, and so on), skipping tools that are already selected; a
duplicate consumes that intent's slot for the round, and the next tool from
that intent's list competes in the following round.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Sequence

from .errors import ConfigurationError, ContractError
from .knowledge_base import RankedResult
from .llm import CompletionFn, parse_listed_lines, render_prompt
from .pipeline import CandidateSet
from .prompts import load_default_template

logger = logging.getLogger(__name__)

DEFAULT_RRF_CONSTANT = 60.0
MAX_TOP_K = 128  # hard provider cap on how many tools an agent can carry

RERANKER_MODES = ("rrf", "llm")


@dataclass(frozen=True)
class FusionConfig:
    """Reranking behaviour for within- and across-intent merging."""

    rrf_constant: float = DEFAULT_RRF_CONSTANT
    reranker: str = "rrf"
    final_top_k: int = 5

    def __post_init__(self) -> None:
        if self.rrf_constant <= 0:
            raise ConfigurationError(f"rrf_constant must be positive, got {self.rrf_constant}")
        if self.reranker not in RERANKER_MODES:
            raise ConfigurationError(f"unknown reranker {self.reranker!r}")
        if not 1 <= self.final_top_k <= MAX_TOP_K:
            raise ConfigurationError(
                f"final_top_k must be between 1 and {MAX_TOP_K}, got {self.final_top_k}"
            )


@dataclass(frozen=True)
class ToolProvenance:
    """Where one selected tool came from."""

    tool_name: str
    intent_index: int
    rank_in_intent: int
    fused_score: float | None = None
    variation_indices: tuple[int, ...] = ()
    step: str = "round_robin"


@dataclass(frozen=True)
class FinalSelection:
    """The ordered tool shortlist handed to the agent, with provenance."""

    tools: tuple[str, ...]
    provenance: tuple[ToolProvenance, ...]


def rrf_fuse(
    ranked_lists: Sequence[Sequence[str]],
    rrf_constant: float = DEFAULT_RRF_CONSTANT,
) -> list[RankedResult]:
    """Merge ranked name lists by reciprocal rank fusion.

    Each occurrence of a name at 1-based rank r contributes
    ``1 / (rrf_constant + r)``. Output is sorted by score descending with
    ties broken by name ascending, and re-ranked 1..n. Contributions are
    totalled with ``math.fsum`` so the result does not depend on the order
    the input lists arrive in.
    """
    if rrf_constant <= 0:
        raise ContractError(f"rrf_constant must be positive, got {rrf_constant}")
    contributions: dict[str, list[float]] = {}
    for ranked in ranked_lists:
        seen_in_list: set[str] = set()
        for position, name in enumerate(ranked, start=1):
            if name in seen_in_list:
                raise ContractError(f"ranked list contains duplicate name {name!r}")
            seen_in_list.add(name)
            contributions.setdefault(name, []).append(1.0 / (rrf_constant + position))
    scores = {name: math.fsum(parts) for name, parts in contributions.items()}
    ordered = sorted(scores.items(), key=lambda item: (-item[1], item[0]))
    return [
        RankedResult(tool_name=name, score=score, rank=position)
        for position, (name, score) in enumerate(ordered, start=1)
    ]


def dedupe(names: Sequence[str]) -> list[str]:
    """Drop repeats, keeping the first occurrence of each name."""
    seen: set[str] = set()
    kept: list[str] = []
    for name in names:
        if name not in seen:
            seen.add(name)
            kept.append(name)
    return kept


def _render_result_blocks(candidate_set: CandidateSet) -> str:
    blocks = []
    for idx, results in enumerate(candidate_set.per_variation):
        label = (
            "USER QUESTION EMBEDDED AND RETRIEVED TOOLS:"
            if idx == 0
            else f"SENTENCE {idx} EMBEDDED AND RETRIEVED TOOLS:"
        )
        names = [r.tool_name for r in results]
        blocks.append(f"{label}\n{names}")
    return "\n".join(blocks)


def fuse_intent(
    candidate_set: CandidateSet,
    config: FusionConfig,
    per_intent_k: int,
    complete: CompletionFn | None = None,
) -> list[str]:
    """Condense one intent's per-variation results into per_intent_k names.

    The rrf reranker fuses and truncates. The llm reranker asks a model to
    order the candidates; names outside the candidate pool are dropped with
    a warning, missing slots are backfilled from the rrf order, and a fully
    unusable model response degrades to the rrf order outright.
    """
    if per_intent_k < 0:
        raise ContractError(f"per_intent_k must be non-negative, got {per_intent_k}")
    if per_intent_k == 0:
        return []
    fused = rrf_fuse(candidate_set.name_lists(), config.rrf_constant)
    rrf_order = [result.tool_name for result in fused]
    if config.reranker == "rrf" or not rrf_order:
        return rrf_order[:per_intent_k]
    if complete is None:
        raise ConfigurationError("llm reranker requires a completion client")
    prompt = render_prompt(
        load_default_template("intent_reranker"),
        {
            "result_blocks": _render_result_blocks(candidate_set),
            "top_k": per_intent_k,
        },
    )
    raw_names = parse_listed_lines(complete(prompt))
    pool = set(rrf_order)
    validated = []
    for name in raw_names:
        if name in pool and name not in validated:
            validated.append(name)
        elif name not in pool:
            logger.warning("llm reranker proposed unknown tool %r; dropping it", name)
    if not validated:
        logger.warning("llm reranker returned no usable names; falling back to rrf order")
        return rrf_order[:per_intent_k]
    for name in rrf_order:
        if len(validated) >= per_intent_k:
            break
        if name not in validated:
            validated.append(name)
    return validated[:per_intent_k]


def combine_intents(
    per_intent_lists: Sequence[Sequence[str]],
    final_top_k: int,
) -> FinalSelection:
    """Interleave per-intent shortlists into one final list.

    Traversal is rank-major: rank 1 of every intent in order, then rank 2 of
    every intent, and so on, stopping once final_top_k tools are selected or
    every list is exhausted. A tool already selected is skipped and consumes
    its intent's slot for that round.
    """
    if final_top_k < 1:
        raise ContractError(f"final_top_k must be at least 1, got {final_top_k}")
    for idx, ranked in enumerate(per_intent_lists):
        if len(set(ranked)) != len(ranked):
            raise ContractError(f"intent {idx} list contains duplicates")
    selected: list[str] = []
    provenance: list[ToolProvenance] = []
    chosen: set[str] = set()
    deepest = max((len(ranked) for ranked in per_intent_lists), default=0)
    for depth in range(deepest):
        for intent_index, ranked in enumerate(per_intent_lists):
            if len(selected) == final_top_k:
                break
            if depth >= len(ranked):
                continue
            name = ranked[depth]
            if name in chosen:
                continue
            chosen.add(name)
            selected.append(name)
            provenance.append(
                ToolProvenance(
                    tool_name=name,
                    intent_index=intent_index,
                    rank_in_intent=depth + 1,
                )
            )
        if len(selected) == final_top_k:
            break
    return FinalSelection(tools=tuple(selected), provenance=tuple(provenance))


def allocate_sub_top_k(final_top_k: int, intent_count: int) -> list[int]:
    """Split a final budget across intents, remainder to the front.

    When there are more intents than budget, the first final_top_k intents
    get one slot each and the rest get zero (logged, since silently dropping
    intents is surprising).
    """
    if final_top_k < 1:
        raise ContractError(f"final_top_k must be at least 1, got {final_top_k}")
    if intent_count < 1:
        raise ContractError(f"intent_count must be at least 1, got {intent_count}")
    if final_top_k < intent_count:
        logger.warning(
            "final_top_k=%d is smaller than intent_count=%d; %d intent(s) get no slots",
            final_top_k,
            intent_count,
            intent_count - final_top_k,
        )
        return [1 if i < final_top_k else 0 for i in range(intent_count)]
    base, remainder = divmod(final_top_k, intent_count)
    return [base + (1 if i < remainder else 0) for i in range(intent_count)]
