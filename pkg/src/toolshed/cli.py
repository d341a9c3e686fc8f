"""Command-line interface.

Subcommands: ``index`` builds and saves a knowledge base, ``retrieve`` runs
one query against a saved index, ``eval`` scores retrieval against a golden
dataset, ``sweep`` measures a (tool_M, top_k) grid, and ``validate`` lints a
tool catalog.

Exit codes: 0 on success, 1 for domain or validation errors (bad input,
violated invariants), 2 for I/O and provider failures.

Every run emits exactly one manifest describing the merged configuration,
seed and outputs: commands writing to a file put it at
``<output>.manifest.json``; commands writing to stdout append it as the
final JSON record unless ``--manifest`` redirects it. Remote providers are
used only when the ``TOOLSHED_EMBED_*`` / ``TOOLSHED_LLM_*`` environment
variables are set; otherwise everything runs in offline modes.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from datetime import datetime, timezone
from typing import Any, Sequence

from . import __version__
from .catalog import (
    ToolCall,
    _iter_records,
    parse_golden_dataset,
    parse_tool_catalog,
    validate_catalog,
)
from .documents import (
    ComposerConfig,
    FixtureEnrichment,
    LlmEnrichment,
    NullEnrichment,
    build_documents,
    parse_enrichment_fixture,
)
from .embeddings import EmbeddingProvider, ProviderConfig
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
from .fusion import FusionConfig
from .knowledge_base import build_index, load_index, save_index
from .llm import HttpCompletionClient
from .metrics import evaluate_query, summarize_evaluations, weighted_accuracy
from .pipeline import REWRITE_ORDER, QueryTransformer, TransformerConfig
from .sweep import SimpleAgentCurve, emit_grid, run_retrieval_sweep

DEFAULT_SEED = 7
DEFAULT_K_LIST = "1,5,10"

EXIT_OK = 0
EXIT_DOMAIN = 1
EXIT_IO = 2

_DOMAIN_ERRORS = (
    ParseError,
    SchemaError,
    ContractError,
    ConfigurationError,
    PipelineError,
    DuplicateToolError,
    CurveError,
)
_IO_ERRORS = (ProviderError, StorageFormatError, OSError)


def _utc_now() -> str:
    return datetime.now(timezone.utc).isoformat()


def write_bytes_atomic(path: str, data: bytes) -> None:
    """Write via a temp file and rename so readers never see partial output."""
    tmp_path = f"{path}.tmp"
    with open(tmp_path, "wb") as handle:
        handle.write(data)
    os.replace(tmp_path, path)


def _read_file(path: str) -> bytes:
    with open(path, "rb") as handle:
        return handle.read()


def _parse_int_list(raw: str, label: str) -> list[int]:
    try:
        values = [int(part) for part in raw.split(",") if part.strip()]
    except ValueError as exc:
        raise ConfigurationError(f"{label} must be a comma-separated integer list: {exc}") from exc
    if not values:
        raise ConfigurationError(f"{label} list is empty")
    if any(v < 1 for v in values):
        raise ConfigurationError(f"{label} values must be positive")
    return values


def _load_config_file(path: str | None) -> dict[str, Any]:
    if not path:
        return {}
    try:
        config = json.loads(_read_file(path).decode("utf-8"))
    except json.JSONDecodeError as exc:
        raise ConfigurationError(f"config file {path} is not valid JSON: {exc.msg}") from exc
    if not isinstance(config, dict):
        raise ConfigurationError(f"config file {path} must contain a JSON object")
    return config


def _merge_config(args: argparse.Namespace, defaults: dict[str, Any]) -> dict[str, Any]:
    """defaults < config file < explicitly passed flags."""
    merged = dict(defaults)
    merged.update(_load_config_file(getattr(args, "config", None)))
    for key in defaults:
        value = getattr(args, key, None)
        if value is not None:
            merged[key] = value
    return merged


def _emit_manifest(
    args: argparse.Namespace,
    command: str,
    config: dict[str, Any],
    outputs: list[str],
    extras: dict[str, Any] | None = None,
    stdout_used: bool = False,
) -> None:
    manifest = {
        "record_type": "manifest",
        "command": command,
        "package_version": __version__,
        "created_at": _utc_now(),
        "config": config,
        "outputs": outputs,
    }
    if extras:
        manifest.update(extras)
    manifest_path = getattr(args, "manifest", None)
    if manifest_path:
        write_bytes_atomic(manifest_path, (json.dumps(manifest, sort_keys=True) + "\n").encode())
    elif outputs:
        write_bytes_atomic(
            f"{outputs[0]}.manifest.json", (json.dumps(manifest, sort_keys=True) + "\n").encode()
        )
    elif stdout_used:
        print(json.dumps(manifest, sort_keys=True))


def _provider_from_env(dimension: int, cache_path: str | None) -> EmbeddingProvider:
    return EmbeddingProvider(ProviderConfig.from_env(dimension=dimension, cache_path=cache_path))


def _transformer(config: dict[str, Any]) -> tuple[QueryTransformer, Any]:
    """Build the query transformer plus the (optional) completion client."""
    complete = HttpCompletionClient.from_env()
    mode = config["mode"]
    if mode == "llm" and complete is None:
        raise ConfigurationError(
            "transform mode 'llm' requires TOOLSHED_LLM_ENDPOINT and TOOLSHED_LLM_MODEL"
        )
    transformer_config = TransformerConfig(
        mode=mode,
        variation_count=config["variations"],
        fixture_path=config.get("fixtures"),
    )
    return QueryTransformer.from_config(transformer_config, complete=complete), complete


def _enrichment_source(config: dict[str, Any]):
    wants_enrichment = config["questions"] > 0 or config["topics"] > 0
    fixture_path = config.get("enrichment_fixture")
    if fixture_path:
        return FixtureEnrichment(parse_enrichment_fixture(_read_file(fixture_path)))
    if not wants_enrichment:
        return NullEnrichment()
    complete = HttpCompletionClient.from_env()
    if complete is None:
        raise ConfigurationError(
            "question/topic generation needs --enrichment-fixture or the "
            "TOOLSHED_LLM_* environment variables"
        )
    return LlmEnrichment(complete)


# -- subcommands ------------------------------------------------------------


def cmd_index(args: argparse.Namespace) -> int:
    defaults = {
        "dimension": 256,
        "schema": True,
        "questions": 0,
        "topics": 0,
        "enrichment_fixture": None,
        "cache": None,
    }
    config = _merge_config(args, defaults)
    tools = parse_tool_catalog(_read_file(args.catalog))
    report = validate_catalog(tools)
    if report:
        for line in report.summary_lines():
            print(line, file=sys.stderr)
        print(f"error: catalog has {len(report.findings)} finding(s)", file=sys.stderr)
        return EXIT_DOMAIN
    composer_config = ComposerConfig(
        include_schema=config["schema"],
        question_count=config["questions"],
        topic_count=config["topics"],
    )
    provider = _provider_from_env(config["dimension"], config["cache"])
    documents = build_documents(tools, composer_config, _enrichment_source(config))
    index = build_index(documents, provider)
    save_index(index, args.out)
    _emit_manifest(
        args,
        "index",
        {**config, "catalog": args.catalog},
        outputs=[args.out],
        extras={
            "fingerprint": index.fingerprint,
            "entry_count": len(index),
            "embedder_identity": index.embedder_identity,
        },
    )
    print(f"indexed {len(index)} tools -> {args.out}")
    print(f"fingerprint: {index.fingerprint}")
    return EXIT_OK


def cmd_retrieve(args: argparse.Namespace) -> int:
    defaults = {"top_k": 5, "mode": "null", "variations": 3, "rrf_constant": 60.0, "fixtures": None}
    config = _merge_config(args, defaults)
    index = load_index(args.index)
    provider = _provider_from_env(index.dimension, None)
    transformer, complete = _transformer(config)
    fusion_config = FusionConfig(
        rrf_constant=config["rrf_constant"],
        final_top_k=config["top_k"],
        reranker="llm" if args.llm_reranker else "rrf",
    )
    selection = execute_query(
        index, provider, transformer, fusion_config, args.query, complete=complete
    )
    lines = []
    for position, item in enumerate(selection.provenance, start=1):
        lines.append(
            json.dumps(
                {
                    "record_type": "tool",
                    "rank": position,
                    "tool_name": item.tool_name,
                    "intent_index": item.intent_index,
                    "rank_in_intent": item.rank_in_intent,
                    "fused_score": item.fused_score,
                    "variation_indices": list(item.variation_indices),
                    "step": item.step,
                }
            )
        )
    payload = ("\n".join(lines) + "\n").encode("utf-8") if lines else b""
    if args.out:
        write_bytes_atomic(args.out, payload)
    else:
        sys.stdout.write(payload.decode("utf-8"))
    _emit_manifest(
        args,
        "retrieve",
        {**config, "index": args.index, "query": args.query},
        outputs=[args.out] if args.out else [],
        extras={"rewrite_order": REWRITE_ORDER, "index_fingerprint": index.fingerprint},
        stdout_used=not args.out,
    )
    return EXIT_OK


def _parse_predicted_calls(raw: bytes) -> dict[str, list[ToolCall]]:
    predicted: dict[str, list[ToolCall]] = {}
    for line_number, record in _iter_records(raw):
        query_id = record.get("query_id")
        calls = record.get("calls")
        if not isinstance(query_id, str) or not isinstance(calls, list):
            raise SchemaError("predicted record needs query_id and calls", line_number)
        parsed = []
        for obj in calls:
            if not isinstance(obj, dict) or not isinstance(obj.get("tool_name"), str):
                raise SchemaError("each call needs a tool_name", line_number)
            arguments = obj.get("arguments", {})
            if not isinstance(arguments, dict):
                raise SchemaError("arguments must be an object", line_number)
            parsed.append(ToolCall(tool_name=obj["tool_name"], arguments=arguments))
        predicted[query_id] = parsed
    return predicted


def cmd_eval(args: argparse.Namespace) -> int:
    defaults = {
        "k": DEFAULT_K_LIST,
        "mode": "null",
        "variations": 3,
        "rrf_constant": 60.0,
        "fixtures": None,
        "predicted": None,
    }
    config = _merge_config(args, defaults)
    k_values = sorted(set(_parse_int_list(config["k"], "k")))
    index = load_index(args.index)
    goldens = parse_golden_dataset(_read_file(args.golden))
    if not goldens:
        raise ContractError("golden dataset is empty")
    index_names = set(index.tool_names())
    missing = sorted(
        {name for record in goldens for name in record.expected_tool_names()} - index_names
    )
    if missing:
        print(f"error: golden tools not present in index: {missing}", file=sys.stderr)
        return EXIT_DOMAIN
    provider = _provider_from_env(index.dimension, None)
    transformer, complete = _transformer(config)
    predicted = (
        _parse_predicted_calls(_read_file(config["predicted"])) if config["predicted"] else None
    )
    max_k = max(k_values)
    fusion_config = FusionConfig(rrf_constant=config["rrf_constant"], final_top_k=max_k)
    rows = []
    evaluations = []
    for record in goldens:
        selection = execute_query(
            index, provider, transformer, fusion_config, record.query_text, complete=complete
        )
        predicted_calls = None
        if predicted is not None:
            predicted_calls = predicted.get(record.query_id, [])
        evaluation = evaluate_query(record, selection.tools, k_values, predicted_calls)
        evaluations.append(evaluation)
        row: dict[str, Any] = {"record_type": "query", "query_id": record.query_id}
        row.update({f"recall@{k}": evaluation.recall[k] for k in k_values})
        if evaluation.call_scores is not None:
            row["name_score"] = evaluation.call_scores.name_score
            row["key_score"] = evaluation.call_scores.key_score
            row["value_score"] = evaluation.call_scores.value_score
            row["weighted_score"] = weighted_accuracy(evaluation.call_scores)
        rows.append(json.dumps(row, sort_keys=True))
    summary = summarize_evaluations(evaluations, k_values)
    rows.append(json.dumps({"record_type": "summary", **summary}, sort_keys=True))
    payload = ("\n".join(rows) + "\n").encode("utf-8")
    if args.out:
        write_bytes_atomic(args.out, payload)
    else:
        sys.stdout.write(payload.decode("utf-8"))
    for k in k_values:
        print(f"mean recall@{k}: {summary[f'recall@{k}']:.6f}", file=sys.stderr)
    if "weighted_accuracy" in summary:
        print(f"mean weighted accuracy: {summary['weighted_accuracy']:.6f}", file=sys.stderr)
    _emit_manifest(
        args,
        "eval",
        {**config, "index": args.index, "golden": args.golden},
        outputs=[args.out] if args.out else [],
        extras={"rewrite_order": REWRITE_ORDER, "summary": summary},
        stdout_used=not args.out,
    )
    return EXIT_OK


def cmd_sweep(args: argparse.Namespace) -> int:
    defaults = {
        "m": None,
        "k": None,
        "seed": DEFAULT_SEED,
        "dimension": 256,
        "schema": True,
        "questions": 0,
        "topics": 0,
        "enrichment_fixture": None,
        "cache": None,
        "mode": "null",
        "variations": 3,
        "rrf_constant": 60.0,
        "fixtures": None,
        "curve": None,
    }
    config = _merge_config(args, defaults)
    if not config["m"] or not config["k"]:
        raise ConfigurationError("sweep requires --m and --k lists")
    m_values = _parse_int_list(config["m"], "m")
    k_values = _parse_int_list(config["k"], "k")
    tools = parse_tool_catalog(_read_file(args.catalog))
    goldens = parse_golden_dataset(_read_file(args.golden))
    provider = _provider_from_env(config["dimension"], config["cache"])
    transformer, _ = _transformer(config)
    composer_config = ComposerConfig(
        include_schema=config["schema"],
        question_count=config["questions"],
        topic_count=config["topics"],
    )
    curve = SimpleAgentCurve.from_csv(_read_file(config["curve"])) if config["curve"] else None
    result = run_retrieval_sweep(
        tools,
        goldens,
        m_values,
        k_values,
        provider,
        transformer,
        composer_config=composer_config,
        enrichment_source=_enrichment_source(config),
        rrf_constant=config["rrf_constant"],
        seed=config["seed"],
        curve=curve,
    )
    write_bytes_atomic(args.out, emit_grid(result.cells))
    _emit_manifest(
        args,
        "sweep",
        {**config, "catalog": args.catalog, "golden": args.golden},
        outputs=[args.out],
        extras={
            "rewrite_order": REWRITE_ORDER,
            "sampling": "seeded_uniform_must_keep",
            "cells": len(result.cells),
            "skipped_cells": [list(item) for item in result.skipped],
            "failed_cells": [list(item) for item in result.failures],
            "all_golden_rate": {
                f"{cell.tool_M},{cell.top_k}": cell.all_golden_rate for cell in result.cells
            },
        },
    )
    print(
        f"swept {len(result.cells)} cell(s), skipped {len(result.skipped)}, "
        f"failed {len(result.failures)} -> {args.out}"
    )
    return EXIT_OK


def cmd_validate(args: argparse.Namespace) -> int:
    tools = parse_tool_catalog(_read_file(args.catalog))
    report = validate_catalog(tools)
    for line in report.summary_lines():
        print(line)
    _emit_manifest(
        args,
        "validate",
        {"catalog": args.catalog},
        outputs=[],
        extras={"finding_count": len(report.findings), "tool_count": len(tools)},
        stdout_used=True,
    )
    if report:
        return EXIT_DOMAIN
    print(f"catalog OK ({len(tools)} tools)")
    return EXIT_OK


# -- parser -----------------------------------------------------------------


def _add_common(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--config", help="JSON config file; explicit flags win over it")
    parser.add_argument("--manifest", help="write the run manifest to this path")


def _add_transform_options(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--mode", choices=["null", "rule", "fixture", "llm"], default=None,
                        help="query transformation mode (default null)")
    parser.add_argument("--fixtures", default=None, help="query fixture file for fixture mode")
    parser.add_argument("--variations", type=int, default=None,
                        help="variation count per intent, including the intent itself (default 3)")
    parser.add_argument("--rrf-constant", dest="rrf_constant", type=float, default=None,
                        help="reciprocal rank fusion constant (default 60)")


def _add_composer_options(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--dimension", type=int, default=None,
                        help="embedding dimension (default 256)")
    parser.add_argument("--schema", action=argparse.BooleanOptionalAction, default=None,
                        help="include the argument schema in documents (default on)")
    parser.add_argument("--questions", type=int, default=None,
                        help="synthetic questions per document (default 0)")
    parser.add_argument("--topics", type=int, default=None,
                        help="key topics per document (default 0)")
    parser.add_argument("--enrichment-fixture", dest="enrichment_fixture", default=None,
                        help="fixture file supplying questions/topics per tool")
    parser.add_argument("--cache", default=None, help="embedding cache file")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="toolshed",
        description="Vector knowledge base and multi-intent retrieval for large tool catalogs",
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    subparsers = parser.add_subparsers(dest="subcommand", required=True)

    p_index = subparsers.add_parser("index", help="build and save a knowledge base")
    p_index.add_argument("--catalog", required=True, help="tool catalog file (line-delimited JSON)")
    p_index.add_argument("--out", required=True, help="output index file")
    _add_composer_options(p_index)
    _add_common(p_index)
    p_index.set_defaults(handler=cmd_index)

    p_retrieve = subparsers.add_parser("retrieve", help="retrieve tools for one query")
    p_retrieve.add_argument("--index", required=True, help="saved index file")
    p_retrieve.add_argument("--query", required=True, help="the user query")
    p_retrieve.add_argument("--top-k", dest="top_k", type=int, default=None,
                            help="number of tools to select (default 5)")
    p_retrieve.add_argument("--llm-reranker", dest="llm_reranker", action="store_true",
                            help="rerank within intents with the completion model")
    p_retrieve.add_argument("--out", default=None, help="write records here instead of stdout")
    _add_transform_options(p_retrieve)
    _add_common(p_retrieve)
    p_retrieve.set_defaults(handler=cmd_retrieve)

    p_eval = subparsers.add_parser("eval", help="score retrieval against a golden dataset")
    p_eval.add_argument("--index", required=True, help="saved index file")
    p_eval.add_argument("--golden", required=True, help="golden dataset file")
    p_eval.add_argument("--k", default=None, help=f"comma-separated k list (default {DEFAULT_K_LIST})")
    p_eval.add_argument("--predicted", default=None,
                        help="predicted tool calls per query_id, for call-accuracy scoring")
    p_eval.add_argument("--out", default=None, help="write the report here instead of stdout")
    _add_transform_options(p_eval)
    _add_common(p_eval)
    p_eval.set_defaults(handler=cmd_eval)

    p_sweep = subparsers.add_parser("sweep", help="measure a (tool_M, top_k) grid")
    p_sweep.add_argument("--catalog", required=True, help="tool catalog file")
    p_sweep.add_argument("--golden", required=True, help="golden dataset file")
    p_sweep.add_argument("--m", default=None, help="comma-separated tool_M list")
    p_sweep.add_argument("--k", default=None, help="comma-separated top_k list")
    p_sweep.add_argument("--seed", type=int, default=None,
                         help=f"distractor sampling seed (default {DEFAULT_SEED})")
    p_sweep.add_argument("--curve", default=None, help="agent accuracy curve CSV (m,accuracy)")
    p_sweep.add_argument("--out", required=True, help="output grid CSV")
    _add_composer_options(p_sweep)
    _add_transform_options(p_sweep)
    _add_common(p_sweep)
    p_sweep.set_defaults(handler=cmd_sweep)

    p_validate = subparsers.add_parser("validate", help="lint a tool catalog")
    p_validate.add_argument("--catalog", required=True, help="tool catalog file")
    _add_common(p_validate)
    p_validate.set_defaults(handler=cmd_validate)

    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.handler(args)
    except _DOMAIN_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN
    except _IO_ERRORS as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ToolshedError as exc:  # anything domain-shaped we missed above
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_DOMAIN


if __name__ == "__main__":
    sys.exit(main())
