"""Retrieval and tool-call accuracy metrics, plus token-cost estimation.

Tool-call correctness is scored on three components: exact tool name match,
recall of the golden argument keys, and value agreement on those keys. The
weighted score is name * 0.50 + keys * 0.25 + values * 0.25, reflecting that
calling the wrong tool is worse than calling the right tool slightly wrong.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Any, Iterable, Mapping, Sequence

from .catalog import GoldenRecord, ToolCall, ToolDefinition
from .errors import ContractError

NAME_WEIGHT = 0.50
KEY_WEIGHT = 0.25
VALUE_WEIGHT = 0.25

DEFAULT_BYTES_PER_TOKEN = 4


@dataclass(frozen=True)
class SubScores:
    """Per-component correctness of a predicted call, each in [0, 1]."""

    name_score: float
    key_score: float
    value_score: float


@dataclass(frozen=True)
class AggregateScores(SubScores):
    """Record-level averages plus the count of surplus predicted calls.

    Surplus calls (predictions beyond the golden set) are reported but do
    not enter the averages; golden calls without a match contribute zeros.
    """

    surplus_predicted: int = 0


def recall_at_k(retrieved: Sequence[str], golden: Iterable[str], k: int) -> float:
    """Fraction of golden tools present in the first k retrieved names."""
    golden_set = set(golden)
    if not golden_set:
        raise ContractError("golden set must be non-empty")
    if k < 1:
        raise ContractError(f"k must be at least 1, got {k}")
    return len(set(retrieved[:k]) & golden_set) / len(golden_set)


def _values_match(predicted: Any, golden: Any) -> bool:
    """Equality with light normalization.

    Strings compare after trimming surrounding whitespace; ints and floats
    compare numerically across types (1 == 1.0). Booleans are deliberately
    excluded from numeric coercion: True is not 1 here.
    """
    if isinstance(predicted, str) and isinstance(golden, str):
        return predicted.strip() == golden.strip()
    pred_numeric = isinstance(predicted, (int, float)) and not isinstance(predicted, bool)
    gold_numeric = isinstance(golden, (int, float)) and not isinstance(golden, bool)
    if pred_numeric and gold_numeric:
        return float(predicted) == float(golden)
    return type(predicted) is type(golden) and predicted == golden


def score_tool_call(predicted: ToolCall, golden: ToolCall) -> SubScores:
    """Score one predicted call against one golden call.

    A golden call with no arguments scores 1.0 on both the key and value
    components; there was nothing to get wrong.
    """
    name_score = 1.0 if predicted.tool_name == golden.tool_name else 0.0
    golden_keys = list(golden.arguments.keys())
    if not golden_keys:
        return SubScores(name_score=name_score, key_score=1.0, value_score=1.0)
    present = [key for key in golden_keys if key in predicted.arguments]
    key_score = len(present) / len(golden_keys)
    matched = sum(
        1 for key in present if _values_match(predicted.arguments[key], golden.arguments[key])
    )
    value_score = matched / len(golden_keys)
    return SubScores(name_score=name_score, key_score=key_score, value_score=value_score)


def weighted_accuracy(scores: SubScores) -> float:
    """Collapse sub-scores into one number with the 0.50/0.25/0.25 weights."""
    return (
        NAME_WEIGHT * scores.name_score
        + KEY_WEIGHT * scores.key_score
        + VALUE_WEIGHT * scores.value_score
    )


def aggregate_record(
    predicted: Sequence[ToolCall],
    golden: Sequence[ToolCall],
) -> AggregateScores:
    """Score a whole record by pairing golden calls to predictions.

    Each golden call, in order, is matched to the first not-yet-matched
    predicted call with the same tool name; golden calls left unmatched
    score zero on every component. The result is the component-wise mean
    over golden calls.
    """
    if not golden:
        raise ContractError("golden call list must be non-empty")
    used: set[int] = set()
    component_sums = [0.0, 0.0, 0.0]
    for golden_call in golden:
        match_idx = next(
            (
                idx
                for idx, call in enumerate(predicted)
                if idx not in used and call.tool_name == golden_call.tool_name
            ),
            None,
        )
        if match_idx is None:
            continue  # unmatched golden call contributes zeros
        used.add(match_idx)
        scores = score_tool_call(predicted[match_idx], golden_call)
        component_sums[0] += scores.name_score
        component_sums[1] += scores.key_score
        component_sums[2] += scores.value_score
    n = len(golden)
    return AggregateScores(
        name_score=component_sums[0] / n,
        key_score=component_sums[1] / n,
        value_score=component_sums[2] / n,
        surplus_predicted=len(predicted) - len(used),
    )


def serialize_tool_for_prompt(tool: ToolDefinition) -> str:
    """Render a tool as the JSON function definition an agent would receive."""
    properties: dict[str, Any] = {}
    required: list[str] = []
    for param in tool.parameters:
        properties[param.name] = {
            "type": param.value_type,
            "description": param.description,
        }
        if param.required:
            required.append(param.name)
    definition = {
        "type": "function",
        "function": {
            "name": tool.name,
            "description": tool.description,
            "parameters": {
                "type": "object",
                "properties": properties,
                "required": required,
                "additionalProperties": False,
            },
        },
    }
    return json.dumps(definition, ensure_ascii=False)


def count_tokens(
    tools: Sequence[ToolDefinition],
    bytes_per_token: int = DEFAULT_BYTES_PER_TOKEN,
) -> int:
    """Estimate the prompt-token cost of carrying these tool definitions.

    Each tool is serialized to its function-definition JSON and costed at
    ceil(utf-8 bytes / bytes_per_token); the total is the sum, so the
    estimate is additive over any partition of the tool list.
    """
    if bytes_per_token < 1:
        raise ContractError(f"bytes_per_token must be at least 1, got {bytes_per_token}")
    return sum(
        math.ceil(len(serialize_tool_for_prompt(tool).encode("utf-8")) / bytes_per_token)
        for tool in tools
    )


@dataclass(frozen=True)
class QueryEvaluation:
    """Evaluation of one golden query."""

    query_id: str
    recall: Mapping[int, float]
    call_scores: AggregateScores | None = None

    def weighted(self) -> float | None:
        return None if self.call_scores is None else weighted_accuracy(self.call_scores)


def evaluate_query(
    record: GoldenRecord,
    retrieved_names: Sequence[str],
    k_values: Sequence[int],
    predicted_calls: Sequence[ToolCall] | None = None,
) -> QueryEvaluation:
    """Compute recall at each k (list prefixes) and optional call scores."""
    golden_names = record.expected_tool_names()
    recall = {k: recall_at_k(retrieved_names, golden_names, k) for k in k_values}
    call_scores = (
        aggregate_record(predicted_calls, record.expected_calls)
        if predicted_calls is not None
        else None
    )
    return QueryEvaluation(query_id=record.query_id, recall=recall, call_scores=call_scores)


def summarize_evaluations(
    evaluations: Sequence[QueryEvaluation], k_values: Sequence[int]
) -> dict[str, Any]:
    """Mean recall per k and, when call scores exist, mean weighted accuracy."""
    if not evaluations:
        raise ContractError("no evaluations to summarize")
    summary: dict[str, Any] = {
        f"recall@{k}": sum(e.recall[k] for e in evaluations) / len(evaluations)
        for k in k_values
    }
    weighted = [e.weighted() for e in evaluations if e.call_scores is not None]
    if weighted:
        summary["weighted_accuracy"] = sum(weighted) / len(weighted)
    summary["query_count"] = len(evaluations)
    return summary
