"""Query-side transformations: rewrite, intent decomposition, expansion.

Every transformation runs in one of four modes:

* ``null`` passes text through untouched, giving a plain-retrieval baseline.
* ``rule`` applies cheap deterministic heuristics, useful for smoke tests.
* ``fixture`` looks transformations up in a pre-built table so multi-intent
  behaviour is exercisable offline and reproducibly.
* ``llm`` asks a completion model, using a free-form reasoning call followed
  by a structuring call that extracts a JSON array.

Rewriting runs before decomposition; downstream run manifests record that
ordering so results remain interpretable.
"""

from __future__ import annotations

import json
import logging
import re
from dataclasses import dataclass, field
from typing import Mapping, Sequence

from .errors import ConfigurationError, PipelineError
from .knowledge_base import RankedResult, ToolshedIndex, query_top_k
from .catalog import _iter_records
from .embeddings import EmbeddingProvider
from .llm import CompletionFn, render_prompt
from .prompts import load_default_template

logger = logging.getLogger(__name__)

MODES = ("null", "rule", "fixture", "llm")
REWRITE_ORDER = "before_decomposition"

_SENTENCE_SPLIT = re.compile(r"[.?!;]+")
_CLAUSE_SPLIT = re.compile(r",\s*(?:and|also|additionally)\s+", re.IGNORECASE)
_LEADING_MARKER = re.compile(r"^(?:and|also|additionally)\s+", re.IGNORECASE)


@dataclass(frozen=True)
class TransformerConfig:
    """Mode and sizing for all query transformations."""

    mode: str = "null"
    variation_count: int = 3
    fixture_path: str | None = None
    prompt_paths: Mapping[str, str] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.mode not in MODES:
            raise ConfigurationError(f"unknown transformer mode {self.mode!r}")
        if self.variation_count < 1:
            raise ConfigurationError(
                f"variation_count must be at least 1, got {self.variation_count}"
            )


@dataclass(frozen=True)
class IntentPlan:
    """A query broken into independently retrievable intents."""

    original_query: str
    rewritten_query: str
    intents: tuple[str, ...]


@dataclass(frozen=True)
class VariationSet:
    """Alternative phrasings of one intent; the intent itself leads."""

    intent: str
    variations: tuple[str, ...]


@dataclass(frozen=True)
class CandidateSet:
    """Per-variation ranked retrieval results for one intent."""

    intent: str
    per_variation: tuple[tuple[RankedResult, ...], ...]

    def name_lists(self) -> list[list[str]]:
        return [[r.tool_name for r in results] for results in self.per_variation]


@dataclass(frozen=True)
class QueryFixtures:
    """Lookup tables backing fixture mode, keyed by exact text."""

    rewrites: Mapping[str, str] = field(default_factory=dict)
    intents: Mapping[str, tuple[str, ...]] = field(default_factory=dict)
    variations: Mapping[str, tuple[str, ...]] = field(default_factory=dict)


def parse_query_fixtures(raw: bytes | str) -> QueryFixtures:
    """Parse a line-delimited fixture file.

    Records may carry any of: ``{"query": ..., "rewritten": ...}``,
    ``{"query": ..., "intents": [...]}`` and, for expansion,
    ``{"query": <intent>, "variations": [...]}``.
    """
    from .errors import SchemaError

    rewrites: dict[str, str] = {}
    intents: dict[str, tuple[str, ...]] = {}
    variations: dict[str, tuple[str, ...]] = {}
    for line_number, record in _iter_records(raw):
        query = record.get("query")
        if not isinstance(query, str) or not query:
            raise SchemaError("fixture record needs a non-empty query", line_number)
        if "rewritten" in record:
            if not isinstance(record["rewritten"], str):
                raise SchemaError("rewritten must be a string", line_number)
            rewrites[query] = record["rewritten"]
        if "intents" in record:
            value = record["intents"]
            if not isinstance(value, list) or not all(isinstance(i, str) for i in value):
                raise SchemaError("intents must be a list of strings", line_number)
            intents[query] = tuple(value)
        if "variations" in record:
            value = record["variations"]
            if not isinstance(value, list) or not all(isinstance(v, str) for v in value):
                raise SchemaError("variations must be a list of strings", line_number)
            variations[query] = tuple(value)
    return QueryFixtures(rewrites=rewrites, intents=intents, variations=variations)


def _strip_quotes(text: str) -> str:
    return text.strip().strip("\"'").strip()


def _parse_json_array(raw: str) -> list[str]:
    """Pull a JSON array of strings out of model output."""
    match = re.search(r"\[.*\]", raw, re.DOTALL)
    if not match:
        raise PipelineError("no JSON array found in model output", raw_output=raw)
    try:
        value = json.loads(match.group(0))
    except json.JSONDecodeError as exc:
        raise PipelineError(f"unparsable JSON array: {exc.msg}", raw_output=raw) from exc
    if not isinstance(value, list) or not all(isinstance(item, str) for item in value):
        raise PipelineError("model output is not an array of strings", raw_output=raw)
    return value


class QueryTransformer:
    """Applies rewrite/decompose/expand under one configuration."""

    def __init__(
        self,
        config: TransformerConfig,
        fixtures: QueryFixtures | None = None,
        complete: CompletionFn | None = None,
        templates: Mapping[str, str] | None = None,
    ) -> None:
        self.config = config
        self.fixtures = fixtures or QueryFixtures()
        self._complete = complete
        self._templates = dict(templates or {})
        if config.mode == "llm" and complete is None:
            raise ConfigurationError("llm mode requires a completion client")

    @classmethod
    def from_config(
        cls, config: TransformerConfig, complete: CompletionFn | None = None
    ) -> "QueryTransformer":
        """Load fixture tables and prompt overrides referenced by the config."""
        fixtures = None
        if config.fixture_path:
            with open(config.fixture_path, "rb") as handle:
                fixtures = parse_query_fixtures(handle.read())
        templates = {}
        for name, path in config.prompt_paths.items():
            with open(path, "r", encoding="utf-8") as handle:
                templates[name] = handle.read()
        return cls(config, fixtures=fixtures, complete=complete, templates=templates)

    def _template(self, name: str) -> str:
        return self._templates.get(name) or load_default_template(name)

    # -- rewrite ----------------------------------------------------------

    def rewrite_query(self, query: str, history: Sequence[str] | None = None) -> str:
        """Contextual rewrite. Identity in null mode, whitespace
        normalization in rule mode, exact-match lookup (falling back to
        identity) in fixture mode, model call in llm mode."""
        mode = self.config.mode
        if mode == "null":
            return query
        if mode == "rule":
            return " ".join(query.split())
        if mode == "fixture":
            return self.fixtures.rewrites.get(query, query)
        context = "\n".join(history) if history else ""
        prompt = (
            "Rewrite the final user message as a single self-contained question, "
            "resolving any references to the prior conversation. Output only the "
            "rewritten question.\n\n"
            f"PRIOR CONVERSATION:\n{context}\n\nFINAL USER MESSAGE: {query}\n\n"
            "REWRITTEN QUESTION:"
        )
        rewritten = _strip_quotes(self._complete(prompt))
        return rewritten or query

    # -- decompose --------------------------------------------------------

    def _rule_decompose(self, query: str) -> list[str]:
        fragments: list[str] = []
        for sentence in _SENTENCE_SPLIT.split(query):
            for clause in _CLAUSE_SPLIT.split(sentence):
                cleaned = _LEADING_MARKER.sub("", clause.strip()).strip()
                if cleaned:
                    fragments.append(cleaned)
        return fragments or [query.strip() or query]

    def decompose_query(self, query: str, original: str | None = None) -> IntentPlan:
        """Split a (possibly rewritten) query into independent intents.

        Always yields at least one intent; null mode yields exactly the
        query itself.
        """
        original = query if original is None else original
        mode = self.config.mode
        if mode == "null":
            intents = [query]
        elif mode == "rule":
            intents = self._rule_decompose(query)
        elif mode == "fixture":
            intents = list(self.fixtures.intents.get(query, (query,)))
        else:
            reasoning = self._complete(
                render_prompt(self._template("decomposition"), {"query": query})
            )
            structured = self._complete(
                render_prompt(
                    self._template("structuring"),
                    {"item_label": "step", "raw_output": reasoning},
                )
            )
            intents = [item for item in _parse_json_array(structured) if item.strip()]
            if not intents:
                raise PipelineError("decomposition produced no intents", raw_output=structured)
        return IntentPlan(
            original_query=original, rewritten_query=query, intents=tuple(intents)
        )

    # -- expand -----------------------------------------------------------

    def expand_query(self, intent: str) -> VariationSet:
        """Produce alternative phrasings, the unmodified intent first.

        The variation count includes the leading intent, so expansion can
        only ever add retrieval candidates relative to no expansion. When a
        fixture or model yields too few distinct variations the set degrades
        to what is available and a warning is logged; nothing is fabricated.
        """
        mode = self.config.mode
        wanted = self.config.variation_count
        # Rule mode has no sensible phrasing generator, so it expands like null.
        if mode in ("null", "rule") or wanted == 1:
            return VariationSet(intent=intent, variations=(intent,))
        if mode == "fixture":
            generated = list(self.fixtures.variations.get(intent, ()))
        else:
            raw = self._complete(
                render_prompt(
                    self._template("expansion"),
                    {"variation_count": wanted - 1, "user_question": intent},
                )
            )
            structured = self._complete(
                render_prompt(
                    self._template("structuring"),
                    {"item_label": "sentence", "raw_output": raw},
                )
            )
            generated = _parse_json_array(structured)
        variations = [intent]
        for candidate in generated:
            candidate = _strip_quotes(candidate)
            if candidate and candidate not in variations:
                variations.append(candidate)
            if len(variations) == wanted:
                break
        if len(variations) < wanted:
            logger.warning(
                "expansion for intent %r produced %d of %d variations; continuing undersized",
                intent,
                len(variations),
                wanted,
            )
        return VariationSet(intent=intent, variations=tuple(variations))

    def plan(self, query: str, history: Sequence[str] | None = None) -> IntentPlan:
        """Rewrite then decompose."""
        rewritten = self.rewrite_query(query, history)
        return self.decompose_query(rewritten, original=query)


def retrieve_for_plan(
    index: ToolshedIndex,
    plan: IntentPlan,
    transformer: QueryTransformer,
    provider: EmbeddingProvider,
    per_variation_k: int,
) -> list[CandidateSet]:
    """Expand each intent and retrieve top-k per variation.

    Failures are re-raised tagged with the intent and variation that caused
    them, because "embedding failed" alone is useless in a 40-variation run.
    """
    candidate_sets = []
    for intent_idx, intent in enumerate(plan.intents):
        variation_set = transformer.expand_query(intent)
        per_variation = []
        for variation_idx, variation in enumerate(variation_set.variations):
            try:
                vector = provider.embed_text(variation)
                results = query_top_k(index, vector, per_variation_k)
            except Exception as exc:
                raise PipelineError(
                    f"retrieval failed for intent {intent_idx} variation {variation_idx} "
                    f"({variation!r}): {exc}"
                ) from exc
            per_variation.append(tuple(results))
        candidate_sets.append(
            CandidateSet(intent=intent, per_variation=tuple(per_variation))
        )
    return candidate_sets
