"""Small input-validation helpers shared by the estimator and the CLI."""

from __future__ import annotations

from typing import Any, Iterable, Sequence

from .catalog import ToolDefinition
from .errors import ConfigurationError, ContractError
from .fusion import MAX_TOP_K


def check_tools(tools: Any) -> list[ToolDefinition]:
    """Ensure a fit input is a non-empty sequence of ToolDefinition."""
    if isinstance(tools, (str, bytes)) or not isinstance(tools, Iterable):
        raise ContractError("expected an iterable of ToolDefinition")
    items = list(tools)
    if not items:
        raise ContractError("cannot fit on an empty tool catalog")
    for item in items:
        if not isinstance(item, ToolDefinition):
            raise ContractError(f"expected ToolDefinition entries, got {type(item).__name__}")
    return items


def check_queries(queries: Any) -> list[str]:
    """Ensure a predict input is a sequence of non-empty strings."""
    if isinstance(queries, str):
        raise ContractError("expected a sequence of query strings, got a single string")
    items = list(queries)
    for query in items:
        if not isinstance(query, str) or not query.strip():
            raise ContractError("queries must be non-empty strings")
    return items


def check_top_k(k: int) -> int:
    """Bound a selection threshold by the provider cap."""
    if not isinstance(k, int) or isinstance(k, bool):
        raise ConfigurationError(f"top_k must be an integer, got {k!r}")
    if not 1 <= k <= MAX_TOP_K:
        raise ConfigurationError(f"top_k must be between 1 and {MAX_TOP_K}, got {k}")
    return k


def check_fitted(estimator: Any, attributes: Sequence[str]) -> None:
    """Raise if the estimator has not been fitted yet."""
    missing = [name for name in attributes if not hasattr(estimator, name)]
    if missing:
        raise ContractError(
            f"{type(estimator).__name__} is not fitted yet; call fit() before using "
            f"{', '.join(missing)}"
        )
