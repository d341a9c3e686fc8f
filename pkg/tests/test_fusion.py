"""Reciprocal rank fusion, intent fusion and cross-intent combination."""

from __future__ import annotations

import logging
import random

import pytest

from toolshed.errors import ConfigurationError, ContractError
from toolshed.fusion import (
    DEFAULT_RRF_CONSTANT,
    MAX_TOP_K,
    FusionConfig,
    allocate_sub_top_k,
    combine_intents,
    dedupe,
    fuse_intent,
    rrf_fuse,
)
from toolshed.knowledge_base import RankedResult
from toolshed.pipeline import CandidateSet


def _candidate_set(name_lists: list[list[str]], intent: str = "the intent") -> CandidateSet:
    per_variation = tuple(
        tuple(
            RankedResult(tool_name=name, score=1.0 / position, rank=position)
            for position, name in enumerate(names, start=1)
        )
        for names in name_lists
    )
    return CandidateSet(intent=intent, per_variation=per_variation)


def test_config_validation():
    assert DEFAULT_RRF_CONSTANT == 60.0
    assert MAX_TOP_K == 128
    with pytest.raises(ConfigurationError):
        FusionConfig(rrf_constant=0.0)
    with pytest.raises(ConfigurationError):
        FusionConfig(reranker="nonsense")
    with pytest.raises(ConfigurationError):
        FusionConfig(final_top_k=0)
    with pytest.raises(ConfigurationError):
        FusionConfig(final_top_k=MAX_TOP_K + 1)
    FusionConfig(final_top_k=MAX_TOP_K)  # boundary is legal


# -- rrf_fuse -----------------------------------------------------------------


def test_rrf_hand_worked_scores():
    fused = rrf_fuse([["A", "B", "C"], ["C", "A"]])
    assert [r.tool_name for r in fused] == ["A", "C", "B"]
    assert [r.rank for r in fused] == [1, 2, 3]
    assert fused[0].score == pytest.approx(1 / 61 + 1 / 62, abs=1e-12)
    assert fused[1].score == pytest.approx(1 / 61 + 1 / 63, abs=1e-12)
    assert fused[2].score == pytest.approx(1 / 62, abs=1e-12)


def test_rrf_custom_constant():
    fused = rrf_fuse([["x"], ["y", "x"]], rrf_constant=1.0)
    assert [r.tool_name for r in fused] == ["x", "y"]
    assert fused[0].score == pytest.approx(1 / 2 + 1 / 3, abs=1e-12)
    assert fused[1].score == pytest.approx(1 / 2, abs=1e-12)


def test_rrf_exact_tie_breaks_by_name():
    fused = rrf_fuse([["beta", "alpha"], ["alpha", "beta"]])
    assert fused[0].score == fused[1].score
    assert [r.tool_name for r in fused] == ["alpha", "beta"]


def test_rrf_single_list_preserves_order():
    fused = rrf_fuse([["x", "y", "z"]])
    assert [r.tool_name for r in fused] == ["x", "y", "z"]


def test_rrf_empty_inputs():
    assert rrf_fuse([]) == []
    assert rrf_fuse([[], []]) == []


def test_rrf_rejects_duplicate_within_a_list_but_not_across():
    with pytest.raises(ContractError):
        rrf_fuse([["a", "b", "a"]])
    fused = rrf_fuse([["a"], ["a"], ["a"]])
    assert fused[0].score == pytest.approx(3 / 61, abs=1e-12)


def test_rrf_rejects_bad_constant():
    for constant in (0.0, -3.5):
        with pytest.raises(ContractError):
            rrf_fuse([["a"]], rrf_constant=constant)


def test_rrf_is_permutation_invariant_over_lists():
    rng = random.Random(90)
    names = [f"n{i}" for i in range(12)]
    for _ in range(30):
        lists = [
            rng.sample(names, rng.randint(1, 8)) for _ in range(rng.randint(1, 5))
        ]
        shuffled = lists[:]
        rng.shuffle(shuffled)
        assert rrf_fuse(lists) == rrf_fuse(shuffled)


def test_rrf_rank_one_everywhere_dominates():
    # A tool at rank 1 in every list outscores every other tool, since any
    # rival misses at least one rank-1 contribution.
    rng = random.Random(91)
    others = [f"t{i}" for i in range(8)]
    for _ in range(40):
        constant = rng.uniform(1, 100)
        lists = []
        for _ in range(rng.randint(1, 4)):
            tail = rng.sample(others, rng.randint(0, len(others)))
            lists.append(["star", *tail])
        fused = rrf_fuse(lists, rrf_constant=constant)
        assert fused[0].tool_name == "star"
        assert all(fused[0].score > r.score for r in fused[1:])


def test_dedupe_keeps_first_occurrence():
    assert dedupe(["a", "b", "a", "c", "b"]) == ["a", "b", "c"]
    assert dedupe([]) == []


# -- fuse_intent --------------------------------------------------------------


def test_fuse_intent_rrf_truncates():
    candidate_set = _candidate_set([["A", "B", "C"], ["C", "A"]])
    config = FusionConfig()
    assert fuse_intent(candidate_set, config, 2) == ["A", "C"]
    assert fuse_intent(candidate_set, config, 10) == ["A", "C", "B"]


def test_fuse_intent_budget_edge_cases():
    candidate_set = _candidate_set([["A"]])
    assert fuse_intent(candidate_set, FusionConfig(), 0) == []
    with pytest.raises(ContractError):
        fuse_intent(candidate_set, FusionConfig(), -1)


def test_fuse_intent_llm_requires_client():
    with pytest.raises(ConfigurationError):
        fuse_intent(_candidate_set([["A"]]), FusionConfig(reranker="llm"), 1)


def test_fuse_intent_llm_reorders_within_pool():
    prompts = []

    def complete(prompt: str) -> str:
        prompts.append(prompt)
        return "1. C\n2. A"

    candidate_set = _candidate_set([["A", "B", "C"], ["C", "A"]])
    out = fuse_intent(candidate_set, FusionConfig(reranker="llm"), 2, complete=complete)
    assert out == ["C", "A"]
    assert "USER QUESTION EMBEDDED AND RETRIEVED TOOLS:" in prompts[0]
    assert "SENTENCE 1 EMBEDDED AND RETRIEVED TOOLS:" in prompts[0]


def test_fuse_intent_llm_drops_unknown_names_and_backfills(caplog):
    candidate_set = _candidate_set([["A", "B", "C"], ["C", "A"]])
    with caplog.at_level(logging.WARNING, logger="toolshed.fusion"):
        out = fuse_intent(
            candidate_set,
            FusionConfig(reranker="llm"),
            3,
            complete=lambda prompt: "1. MadeUpTool\n2. C",
        )
    # C validated, then rrf order (A, C, B) backfills the other slots.
    assert out == ["C", "A", "B"]
    assert any("MadeUpTool" in message for message in caplog.messages)


def test_fuse_intent_llm_unusable_response_falls_back_to_rrf(caplog):
    candidate_set = _candidate_set([["A", "B", "C"], ["C", "A"]])
    with caplog.at_level(logging.WARNING, logger="toolshed.fusion"):
        out = fuse_intent(
            candidate_set,
            FusionConfig(reranker="llm"),
            2,
            complete=lambda prompt: "no tool names in here",
        )
    assert out == ["A", "C"]
    assert any("falling back" in message for message in caplog.messages)


def test_fuse_intent_llm_empty_candidates_never_calls_model():
    def explode(prompt: str) -> str:
        raise AssertionError("model should not be consulted without candidates")

    out = fuse_intent(_candidate_set([[], []]), FusionConfig(reranker="llm"), 3, complete=explode)
    assert out == []


# -- combine_intents ----------------------------------------------------------


def test_combine_single_intent_is_truncation():
    selection = combine_intents([["a", "b", "c", "d"]], 3)
    assert selection.tools == ("a", "b", "c")
    assert [p.rank_in_intent for p in selection.provenance] == [1, 2, 3]
    assert all(p.intent_index == 0 for p in selection.provenance)


def test_combine_disjoint_lists_round_robin():
    selection = combine_intents([["a1", "a2"], ["b1", "b2"]], 4)
    assert selection.tools == ("a1", "b1", "a2", "b2")


def test_combine_duplicate_consumes_slot_for_that_round():
    selection = combine_intents([["x", "a2"], ["x", "b2"]], 3)
    assert selection.tools == ("x", "a2", "b2")
    assert selection.provenance[0].intent_index == 0
    assert selection.provenance[1].rank_in_intent == 2
    assert selection.provenance[2].rank_in_intent == 2


def test_combine_exhaustion_returns_fewer_than_requested():
    selection = combine_intents([["a"], ["b"]], 10)
    assert selection.tools == ("a", "b")


def test_combine_uneven_list_lengths():
    selection = combine_intents([["a1"], ["b1", "b2", "b3"]], 4)
    assert selection.tools == ("a1", "b1", "b2", "b3")


def test_combine_rejects_bad_inputs():
    with pytest.raises(ContractError):
        combine_intents([["a"]], 0)
    with pytest.raises(ContractError):
        combine_intents([["a", "a"]], 2)


def test_combine_provenance_step_label():
    selection = combine_intents([["a"]], 1)
    assert selection.provenance[0].step == "round_robin"
    assert selection.provenance[0].fused_score is None


def test_combine_randomized_invariants():
    rng = random.Random(17)
    names = [f"tool{i}" for i in range(15)]
    for _ in range(100):
        lists = [
            rng.sample(names, rng.randint(0, 8)) for _ in range(rng.randint(1, 4))
        ]
        k = rng.randint(1, 8)
        selection = combine_intents(lists, k)
        assert len(selection.tools) <= k
        assert len(set(selection.tools)) == len(selection.tools)
        available = {name for ranked in lists for name in ranked}
        assert set(selection.tools) <= available
        assert len(selection.tools) == min(k, len(available))
        for tool, prov in zip(selection.tools, selection.provenance):
            assert prov.tool_name == tool
            assert lists[prov.intent_index][prov.rank_in_intent - 1] == tool


# -- allocate_sub_top_k -------------------------------------------------------


def test_allocate_even_split():
    assert allocate_sub_top_k(24, 3) == [8, 8, 8]


def test_allocate_remainder_goes_to_front():
    assert allocate_sub_top_k(5, 2) == [3, 2]
    assert allocate_sub_top_k(7, 3) == [3, 2, 2]


def test_allocate_single_intent_takes_all():
    assert allocate_sub_top_k(5, 1) == [5]


def test_allocate_more_intents_than_budget(caplog):
    with caplog.at_level(logging.WARNING, logger="toolshed.fusion"):
        assert allocate_sub_top_k(2, 3) == [1, 1, 0]
    assert any("no slots" in message for message in caplog.messages)


def test_allocate_sum_property():
    rng = random.Random(200)
    for _ in range(100):
        k = rng.randint(1, 30)
        n = rng.randint(1, 10)
        budgets = allocate_sub_top_k(k, n)
        assert len(budgets) == n
        assert sum(budgets) == k
        if k >= n:
            assert min(budgets) >= 1
            assert max(budgets) - min(budgets) <= 1


def test_allocate_rejects_non_positive():
    with pytest.raises(ContractError):
        allocate_sub_top_k(0, 1)
    with pytest.raises(ContractError):
        allocate_sub_top_k(1, 0)
