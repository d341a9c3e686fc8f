"""Estimator-protocol behaviour of the sklearn-style facade."""

from __future__ import annotations

import logging

import pytest
from sklearn.base import clone

from toolshed.errors import ConfigurationError, ContractError
from toolshed.fusion import FinalSelection
from toolshed.pipeline import QueryFixtures
from toolshed.retriever import ToolshedRetriever

from .conftest import make_tool


def _signature_tools(n: int = 10) -> list:
    return [make_tool(f"tool_{i:02d}", f"signal{i:02d} payload") for i in range(n)]


def test_get_set_params_round_trip():
    estimator = ToolshedRetriever(dimension=128, final_top_k=3)
    params = estimator.get_params()
    assert params["dimension"] == 128
    assert params["final_top_k"] == 3
    assert params["transform_mode"] == "null"
    estimator.set_params(dimension=64, rrf_constant=10.0)
    assert estimator.dimension == 64
    assert estimator.rrf_constant == 10.0


def test_clone_preserves_params_and_drops_state():
    estimator = ToolshedRetriever(dimension=64).fit(_signature_tools())
    copied = clone(estimator)
    assert copied.get_params() == estimator.get_params()
    with pytest.raises(ContractError):
        copied.predict(["signal00 payload"])


def test_unfitted_usage_is_rejected():
    estimator = ToolshedRetriever()
    with pytest.raises(ContractError) as excinfo:
        estimator.predict(["q"])
    assert "fit" in str(excinfo.value)
    with pytest.raises(ContractError):
        estimator.retrieve("q")
    with pytest.raises(ContractError):
        estimator.score(["q"], [["t"]])


def test_fit_returns_self_and_sets_state():
    estimator = ToolshedRetriever()
    assert estimator.fit(_signature_tools()) is estimator
    assert len(estimator.index_) == 10
    assert estimator.fusion_config_.final_top_k == 5


def test_fit_input_validation():
    with pytest.raises(ContractError):
        ToolshedRetriever().fit([])
    with pytest.raises(ContractError):
        ToolshedRetriever().fit("not a catalog")
    with pytest.raises(ContractError):
        ToolshedRetriever().fit([make_tool("a"), "b"])
    with pytest.raises(ConfigurationError):
        ToolshedRetriever(final_top_k=0).fit(_signature_tools())
    with pytest.raises(ConfigurationError):
        ToolshedRetriever(final_top_k=True).fit(_signature_tools())


def test_fit_rejects_duplicate_names():
    tools = [make_tool("same_name", "one"), make_tool("same_name", "two")]
    with pytest.raises(ContractError) as excinfo:
        ToolshedRetriever().fit(tools)
    assert "same_name" in str(excinfo.value)


def test_fit_warns_on_nonfatal_findings(caplog):
    tools = [make_tool("fine_tool", "described"), make_tool("bare_tool", "")]
    with caplog.at_level(logging.WARNING, logger="toolshed.retriever"):
        estimator = ToolshedRetriever().fit(tools)
    assert len(estimator.index_) == 2
    assert any("empty_description" in message for message in caplog.messages)


def test_predict_shapes_and_validation():
    estimator = ToolshedRetriever(final_top_k=3).fit(_signature_tools())
    predictions = estimator.predict(["signal04 payload", "signal07 payload"])
    assert len(predictions) == 2
    for ranked in predictions:
        assert 1 <= len(ranked) <= 3
        assert all(isinstance(name, str) for name in ranked)
    assert predictions[0][0] == "tool_04"
    assert predictions[1][0] == "tool_07"
    with pytest.raises(ContractError):
        estimator.predict("a bare string")
    with pytest.raises(ContractError):
        estimator.predict(["ok", "  "])


def test_retrieve_returns_provenance():
    estimator = ToolshedRetriever(final_top_k=2).fit(_signature_tools())
    selection = estimator.retrieve("signal03 payload")
    assert isinstance(selection, FinalSelection)
    assert selection.tools[0] == "tool_03"
    assert selection.provenance[0].intent_index == 0
    with pytest.raises(ContractError):
        estimator.retrieve("")
    with pytest.raises(ContractError):
        estimator.retrieve(None)


def test_score_perfect_and_partial():
    estimator = ToolshedRetriever(final_top_k=1).fit(_signature_tools())
    queries = [f"signal{i:02d} payload" for i in range(10)]
    golden = [[f"tool_{i:02d}"] for i in range(10)]
    assert estimator.score(queries, golden) == 1.0

    half_wrong = [[f"tool_{i:02d}"] for i in range(5)] + [["tool_00"]] * 5
    assert estimator.score(queries, half_wrong) == pytest.approx(0.5)

    with pytest.raises(ContractError):
        estimator.score(queries, golden[:3])


def test_fixture_mode_decomposes_through_facade():
    tools = [
        make_tool("climate_scan", "climate raw data"),
        make_tool("bond_scan", "bond raw data"),
        make_tool("noise_a", "irrelevant alpha"),
        make_tool("noise_b", "irrelevant beta"),
    ]
    fixtures = QueryFixtures(intents={"both please": ("climate data", "bond data")})
    estimator = ToolshedRetriever(
        transform_mode="fixture",
        query_fixtures=fixtures,
        final_top_k=2,
        variation_count=1,
    ).fit(tools)
    selection = estimator.retrieve("both please")
    assert set(selection.tools) == {"climate_scan", "bond_scan"}
    assert {item.intent_index for item in selection.provenance} == {0, 1}
