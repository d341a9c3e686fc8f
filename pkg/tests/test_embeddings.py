"""Offline hashed embedding, cosine kernel, provider caching and HTTP mode."""

from __future__ import annotations

import math
import random

import numpy as np
import pytest

from toolshed.embeddings import (
    DEFAULT_DIMENSION,
    EmbeddingProvider,
    ProviderConfig,
    cosine_similarity,
    hashed_bow_embed,
    tokenize,
)
from toolshed.errors import (
    ConfigurationError,
    ContractError,
    ProviderError,
    StorageFormatError,
)


def _fnv1a_64_oracle(data: bytes) -> int:
    # Independent implementation of the 64-bit FNV-1a parameters.
    value = 14695981039346656037
    for byte in data:
        value = ((value ^ byte) * 1099511628211) % (1 << 64)
    return value


def test_tokenize_lowercases_and_splits_on_non_alphanumerics():
    assert tokenize("Hello, World! x2") == ["hello", "world", "x2"]
    assert tokenize("...") == []


def test_hashed_bow_bag_semantics_ignores_order():
    a = hashed_bow_embed("alpha beta")
    b = hashed_bow_embed("beta alpha")
    assert np.array_equal(a, b)


def test_hashed_bow_single_token_is_one_hot():
    vector = hashed_bow_embed("solitary", dimension=64)
    expected_bucket = _fnv1a_64_oracle(b"solitary") % 64
    assert vector[expected_bucket] == 1.0
    assert np.count_nonzero(vector) == 1


def test_hashed_bow_empty_text_is_zero_vector():
    vector = hashed_bow_embed("")
    assert vector.shape == (DEFAULT_DIMENSION,)
    assert not vector.any()


def test_hashed_bow_norm_is_zero_or_one():
    rng = random.Random(404)
    words = ["amber", "basalt", "cedar", "delta", "ember", "flint"]
    for _ in range(100):
        text = " ".join(rng.choice(words) for _ in range(rng.randint(0, 12)))
        norm = float(np.linalg.norm(hashed_bow_embed(text, dimension=32)))
        assert norm == 0.0 or abs(norm - 1.0) < 1e-9


def test_hashed_bow_bucket_counts_match_oracle():
    text = "red red blue green red blue"
    dimension = 16
    expected = np.zeros(dimension)
    for token in ["red", "red", "blue", "green", "red", "blue"]:
        expected[_fnv1a_64_oracle(token.encode()) % dimension] += 1.0
    expected /= np.linalg.norm(expected)
    assert np.allclose(hashed_bow_embed(text, dimension), expected, atol=1e-12)


def test_hashed_bow_rejects_nonpositive_dimension():
    with pytest.raises(ContractError):
        hashed_bow_embed("x", dimension=0)


# -- cosine -------------------------------------------------------------------


def test_cosine_self_similarity_is_one():
    v = np.array([0.3, -1.2, 4.0])
    assert cosine_similarity(v, v) == pytest.approx(1.0, abs=1e-12)


def test_cosine_orthogonal_unit_vectors():
    assert cosine_similarity(np.array([1.0, 0.0]), np.array([0.0, 1.0])) == 0.0


def test_cosine_hand_value_45_degrees():
    value = cosine_similarity(np.array([1.0, 0.0]), np.array([1.0, 1.0]))
    assert value == pytest.approx(1.0 / math.sqrt(2.0), abs=1e-8)


def test_cosine_zero_norm_scores_zero():
    assert cosine_similarity(np.zeros(4), np.ones(4)) == 0.0


def test_cosine_dimension_mismatch_is_contract_error():
    with pytest.raises(ContractError):
        cosine_similarity(np.ones(3), np.ones(4))


def test_cosine_symmetric_and_scale_invariant():
    rng = np.random.default_rng(11)
    for _ in range(50):
        a = rng.normal(size=8)
        b = rng.normal(size=8)
        lam = float(rng.uniform(0.1, 10.0))
        assert cosine_similarity(a, b) == pytest.approx(cosine_similarity(b, a), abs=1e-9)
        assert cosine_similarity(lam * a, b) == pytest.approx(cosine_similarity(a, b), abs=1e-9)


def test_cosine_clamped_to_unit_interval():
    rng = np.random.default_rng(12)
    for _ in range(200):
        a = rng.normal(size=5)
        assert -1.0 <= cosine_similarity(a, rng.normal(size=5)) <= 1.0


# -- provider config ----------------------------------------------------------


def test_provider_config_rejects_unknown_mode_and_bad_dimension():
    with pytest.raises(ConfigurationError):
        ProviderConfig(mode="quantum")
    with pytest.raises(ConfigurationError):
        ProviderConfig(dimension=0)
    with pytest.raises(ConfigurationError):
        ProviderConfig(mode="http")  # needs endpoint + model


def test_provider_config_from_env():
    offline = ProviderConfig.from_env(environ={})
    assert offline.mode == "offline_hashed_bow"
    http = ProviderConfig.from_env(
        dimension=1536,
        environ={
            "TOOLSHED_EMBED_ENDPOINT": "https://example.test/v1/embeddings",
            "TOOLSHED_EMBED_MODEL": "embedder-1",
            "TOOLSHED_EMBED_KEY": "secret",
        },
    )
    assert http.mode == "http"
    assert http.model == "embedder-1"
    assert http.api_key == "secret"
    # A partial environment stays offline.
    partial = ProviderConfig.from_env(environ={"TOOLSHED_EMBED_ENDPOINT": "https://x"})
    assert partial.mode == "offline_hashed_bow"


# -- provider + cache ---------------------------------------------------------


def test_offline_embed_deterministic_and_counts_requests():
    provider = EmbeddingProvider(ProviderConfig(dimension=64))
    first = provider.embed_text("the same text")
    second = provider.embed_text("the same text")
    assert np.array_equal(first, second)
    assert provider.request_count == 1  # second call was a cache hit


def test_cache_hit_is_bit_exact_across_disk_round_trip(tmp_path):
    cache_path = str(tmp_path / "vectors.tsec")
    provider = EmbeddingProvider(ProviderConfig(dimension=96, cache_path=cache_path))
    texts = [f"document number {i}" for i in range(10)]
    originals = [provider.embed_text(t) for t in texts]
    assert provider.request_count == 10

    fresh = EmbeddingProvider(ProviderConfig(dimension=96, cache_path=cache_path))
    for text, original in zip(texts, originals):
        again = fresh.embed_text(text)
        assert again.tobytes() == original.tobytes()
    assert fresh.request_count == 0


def test_cache_corruption_reports_offset(tmp_path):
    cache_path = tmp_path / "vectors.tsec"
    provider = EmbeddingProvider(ProviderConfig(dimension=8, cache_path=str(cache_path)))
    provider.embed_text("something")
    blob = cache_path.read_bytes()
    cache_path.write_bytes(blob[:-4])  # chop the tail of the vector
    with pytest.raises(StorageFormatError) as excinfo:
        EmbeddingProvider(ProviderConfig(dimension=8, cache_path=str(cache_path)))
    assert excinfo.value.offset is not None


def test_cache_bad_magic_rejected(tmp_path):
    cache_path = tmp_path / "vectors.tsec"
    cache_path.write_bytes(b"XXXX\x01\x00")
    with pytest.raises(StorageFormatError):
        EmbeddingProvider(ProviderConfig(dimension=8, cache_path=str(cache_path)))


def test_identity_strings():
    offline = EmbeddingProvider(ProviderConfig(dimension=256))
    assert offline.identity() == "offline_hashed_bow:d=256"
    http = EmbeddingProvider(
        ProviderConfig(mode="http", dimension=1536, endpoint="https://e", model="m-1"),
        transport=lambda url, headers, payload: {},
    )
    assert http.identity() == "http:m-1:d=1536"


def test_embed_many_shape_and_rows():
    provider = EmbeddingProvider(ProviderConfig(dimension=32))
    matrix = provider.embed_many(["a b", "c", "a b"])
    assert matrix.shape == (3, 32)
    assert np.array_equal(matrix[0], matrix[2])
    empty = provider.embed_many([])
    assert empty.shape == (0, 32)


# -- http mode ----------------------------------------------------------------


def _http_provider(transport, dimension=1536, max_attempts=3):
    config = ProviderConfig(
        mode="http", dimension=dimension, endpoint="https://example.test", model="m"
    )
    return EmbeddingProvider(config, transport=transport, max_attempts=max_attempts)


def test_http_mode_accepts_provider_vector_verbatim():
    values = [float(i) / 100.0 for i in range(1536)]

    def transport(url, headers, payload):
        assert payload == {"model": "m", "input": "hello"}
        return {"data": [{"embedding": values}]}

    provider = _http_provider(transport)
    vector = provider.embed_text("hello")
    assert vector.shape == (1536,)
    assert list(vector) == values


def test_http_mode_dimension_mismatch_is_configuration_error():
    provider = _http_provider(lambda u, h, p: {"data": [{"embedding": [1.0, 2.0]}]})
    with pytest.raises(ConfigurationError):
        provider.embed_text("hello")


def test_http_mode_retries_then_raises_provider_error():
    attempts = []

    def transport(url, headers, payload):
        attempts.append(1)
        raise OSError("connection refused")

    provider = _http_provider(transport, max_attempts=3)
    with pytest.raises(ProviderError) as excinfo:
        provider.embed_text("hello")
    assert len(attempts) == 3
    assert excinfo.value.attempts == 3
    assert excinfo.value.retryable is True


def test_http_mode_recovers_on_second_attempt():
    state = {"calls": 0}

    def transport(url, headers, payload):
        state["calls"] += 1
        if state["calls"] == 1:
            raise OSError("flaky")
        return {"data": [{"embedding": [1.0] * 4}]}

    provider = _http_provider(transport, dimension=4)
    vector = provider.embed_text("hello")
    assert vector.shape == (4,)
    assert state["calls"] == 2


def test_http_mode_malformed_body_not_retryable():
    provider = _http_provider(lambda u, h, p: {"unexpected": True})
    with pytest.raises(ProviderError) as excinfo:
        provider.embed_text("hello")
    assert excinfo.value.retryable is False


def test_http_mode_rejects_empty_text():
    provider = _http_provider(lambda u, h, p: {"data": [{"embedding": [0.0] * 1536}]})
    with pytest.raises(ContractError):
        provider.embed_text("")


def test_http_mode_non_finite_values_rejected():
    provider = _http_provider(
        lambda u, h, p: {"data": [{"embedding": [float("nan")] * 4}]}, dimension=4
    )
    with pytest.raises(ProviderError):
        provider.embed_text("hello")


def test_http_mode_uses_cache_for_repeat_texts():
    calls = []

    def transport(url, headers, payload):
        calls.append(payload["input"])
        return {"data": [{"embedding": [2.0, 3.0, 4.0]}]}

    provider = _http_provider(transport, dimension=3)
    first = provider.embed_text("repeat me")
    second = provider.embed_text("repeat me")
    assert calls == ["repeat me"]
    assert first.tobytes() == second.tobytes()
