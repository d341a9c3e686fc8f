"""Retrieval sweeps over catalog size and selection threshold.

A sweep measures mean recall@k for every (tool_M, top_k) cell of a grid:
tool_M controls how many tools the knowledge base holds (golden tools always
kept, distractors sampled with a fixed seed so growing subsets nest), and
top_k is the selection threshold handed to the retrieval pipeline. Cells also
carry the prompt-token cost of the selected tools and, when a measured agent
accuracy curve is supplied, the modeled end-to-end accuracy
retrieval * agent(top_k).
"""

from __future__ import annotations

import csv
import io
import logging
from dataclasses import dataclass, replace
from typing import Mapping, Sequence

from .catalog import GoldenRecord, ToolDefinition
from .documents import ComposerConfig, build_documents
from .embeddings import EmbeddingProvider
from .engine import execute_query
from .errors import ContractError, CurveError, PipelineError
from .fusion import MAX_TOP_K, FusionConfig
from .knowledge_base import ToolshedIndex, build_index, subset_index
from .metrics import count_tokens, recall_at_k
from .pipeline import QueryTransformer

logger = logging.getLogger(__name__)

GRID_HEADER = ("tool_M", "top_k", "retrieval_accuracy", "token_estimate", "modeled_agent_accuracy")


@dataclass(frozen=True)
class SweepCell:
    """Measurements for one (tool_M, top_k) grid point."""

    tool_M: int
    top_k: int
    retrieval_accuracy: float
    token_estimate: int
    modeled_agent_accuracy: float | None = None
    all_golden_rate: float | None = None  # fraction of queries with every golden tool found


@dataclass(frozen=True)
class SimpleAgentCurve:
    """Measured tool-calling accuracy of an agent as a function of tool count."""

    points: Mapping[int, float]

    def __post_init__(self) -> None:
        if not self.points:
            raise CurveError("accuracy curve has no points")
        for m, accuracy in self.points.items():
            if not 1 <= int(m) <= MAX_TOP_K:
                raise CurveError(f"curve point m={m} outside [1, {MAX_TOP_K}]")
            if not 0.0 <= accuracy <= 1.0:
                raise CurveError(f"curve accuracy {accuracy} at m={m} outside [0, 1]")

    @classmethod
    def from_csv(cls, raw: bytes | str) -> "SimpleAgentCurve":
        """Parse ``m,accuracy`` rows (header required)."""
        text = raw.decode("utf-8") if isinstance(raw, bytes) else raw
        reader = csv.DictReader(io.StringIO(text))
        if reader.fieldnames is None or [f.strip() for f in reader.fieldnames] != ["m", "accuracy"]:
            raise CurveError(f"curve header must be 'm,accuracy', got {reader.fieldnames}")
        reader.fieldnames = ["m", "accuracy"]
        points: dict[int, float] = {}
        for row in reader:
            try:
                points[int(row["m"])] = float(row["accuracy"])
            except (TypeError, ValueError) as exc:
                raise CurveError(f"bad curve row {row}: {exc}") from exc
        return cls(points=points)

    def value_at(self, m: int) -> float:
        """Accuracy at m, linearly interpolated between bracketing points."""
        if m in self.points:
            return float(self.points[m])
        known = sorted(self.points)
        if m < known[0] or m > known[-1]:
            raise CurveError(
                f"m={m} outside curve domain [{known[0]}, {known[-1]}]; refusing to extrapolate"
            )
        below = max(p for p in known if p < m)
        above = min(p for p in known if p > m)
        fraction = (m - below) / (above - below)
        return float(self.points[below] + fraction * (self.points[above] - self.points[below]))


def expected_agent_accuracy(cell: SweepCell, curve: SimpleAgentCurve) -> float:
    """Model end-to-end accuracy as retrieval accuracy times agent accuracy.

    The agent factor is the curve evaluated at the cell's top_k: with only
    top_k tools in context, the agent behaves like one equipped with that
    many tools outright. Clamped into [0, 1].
    """
    product = cell.retrieval_accuracy * curve.value_at(cell.top_k)
    return min(1.0, max(0.0, product))


@dataclass(frozen=True)
class SweepResult:
    """All cells produced by a sweep plus skipped/failed cell records."""

    cells: tuple[SweepCell, ...]
    skipped: tuple[tuple[int, int, str], ...] = ()
    failures: tuple[tuple[int, int, str], ...] = ()


def run_retrieval_sweep(
    tools: Sequence[ToolDefinition],
    goldens: Sequence[GoldenRecord],
    m_values: Sequence[int],
    k_values: Sequence[int],
    provider: EmbeddingProvider,
    transformer: QueryTransformer,
    composer_config: ComposerConfig | None = None,
    enrichment_source=None,
    rrf_constant: float = 60.0,
    seed: int = 0,
    curve: SimpleAgentCurve | None = None,
) -> SweepResult:
    """Measure retrieval across a (tool_M, top_k) grid.

    The full catalog is composed and embedded once; each tool_M level is a
    seeded subset of that index with every golden tool force-kept. Cells
    with top_k > min(tool_M, 128) are out of domain and recorded as skipped.
    A pipeline failure aborts only its own cell.
    """
    if not goldens:
        raise ContractError("sweep needs at least one golden query")
    golden_names = {name for record in goldens for name in record.expected_tool_names()}
    missing = sorted(golden_names - set(tool.name for tool in tools))
    if missing:
        raise ContractError(f"golden tools missing from catalog: {missing}")
    by_name = {tool.name: tool for tool in tools}
    documents = build_documents(list(tools), composer_config or ComposerConfig(), enrichment_source)
    full_index = build_index(documents, provider)
    cells: list[SweepCell] = []
    skipped: list[tuple[int, int, str]] = []
    failures: list[tuple[int, int, str]] = []
    for m in m_values:
        if not len(golden_names) <= m <= len(tools):
            skipped.append((m, -1, f"tool_M={m} outside [{len(golden_names)}, {len(tools)}]"))
            continue
        sub = subset_index(full_index, m, must_keep=golden_names, seed=seed)
        for k in k_values:
            if k > min(m, MAX_TOP_K):
                skipped.append((m, k, f"top_k={k} exceeds min(tool_M, {MAX_TOP_K})"))
                continue
            try:
                cells.append(
                    _measure_cell(sub, m, k, goldens, by_name, provider, transformer, rrf_constant, curve)
                )
            except PipelineError as exc:
                logger.warning("sweep cell (M=%d, k=%d) failed: %s", m, k, exc)
                failures.append((m, k, str(exc)))
    return SweepResult(cells=tuple(cells), skipped=tuple(skipped), failures=tuple(failures))


def _measure_cell(
    index: ToolshedIndex,
    m: int,
    k: int,
    goldens: Sequence[GoldenRecord],
    by_name: Mapping[str, ToolDefinition],
    provider: EmbeddingProvider,
    transformer: QueryTransformer,
    rrf_constant: float,
    curve: SimpleAgentCurve | None,
) -> SweepCell:
    fusion_config = FusionConfig(rrf_constant=rrf_constant, final_top_k=k)
    recalls = []
    token_costs = []
    full_hits = 0
    for record in goldens:
        selection = execute_query(index, provider, transformer, fusion_config, record.query_text)
        recall = recall_at_k(selection.tools, record.expected_tool_names(), k)
        recalls.append(recall)
        if recall == 1.0:
            full_hits += 1
        token_costs.append(count_tokens([by_name[name] for name in selection.tools]))
    cell = SweepCell(
        tool_M=m,
        top_k=k,
        retrieval_accuracy=sum(recalls) / len(recalls),
        token_estimate=int(round(sum(token_costs) / len(token_costs))),
        all_golden_rate=full_hits / len(goldens),
    )
    if curve is not None:
        cell = replace(cell, modeled_agent_accuracy=expected_agent_accuracy(cell, curve))
    return cell


def emit_grid(cells: Sequence[SweepCell]) -> bytes:
    """Render cells as a CSV grid, sorted by (tool_M, top_k), 6-decimal reals."""
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(GRID_HEADER)
    for cell in sorted(cells, key=lambda c: (c.tool_M, c.top_k)):
        writer.writerow(
            [
                cell.tool_M,
                cell.top_k,
                f"{cell.retrieval_accuracy:.6f}",
                cell.token_estimate,
                "" if cell.modeled_agent_accuracy is None else f"{cell.modeled_agent_accuracy:.6f}",
            ]
        )
    return buffer.getvalue().encode("utf-8")
