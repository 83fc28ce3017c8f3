import json

import numpy as np
import pytest

from orange.gateway import (
    Cassette,
    CassetteMiss,
    ChatMessage,
    ChatRequest,
    GatewayConfig,
    ModelGateway,
    embed_digest,
    mock_embedding,
    request_digest,
)


def _req(content, **kwargs):
    return ChatRequest(messages=(ChatMessage("user", content),), **kwargs)


def test_digest_ignores_trailing_whitespace():
    a = _req("SELECT 1   \nFROM t  ")
    b = _req("SELECT 1\nFROM t")
    c = _req("SELECT 1\r\nFROM t\r\n")
    assert request_digest(a) == request_digest(b) == request_digest(c)


def test_digest_sensitive_to_content_and_sampling():
    assert request_digest(_req("a")) != request_digest(_req("b"))
    assert request_digest(_req("a", seed=0)) != request_digest(_req("a", seed=1))
    assert request_digest(_req("a", temperature=0.0)) != request_digest(_req("a", temperature=0.8))


def test_digest_ignores_metadata():
    a = _req("a", conversation_id="x", agent="parser")
    b = _req("a", conversation_id="y", agent="coder")
    assert request_digest(a) == request_digest(b)


def test_request_validation():
    with pytest.raises(ValueError):
        ChatRequest(messages=())
    with pytest.raises(ValueError):
        ChatRequest(messages=(ChatMessage("user", "x"), ChatMessage("system", "late")))
    with pytest.raises(ValueError):
        ChatRequest(messages=(ChatMessage("robot", "x"),))


def test_mock_determinism(mock_gateway):
    req = _req("### TASK: GENERATE\n\nCREATE TABLE t (\n    a\n);\n\nQuestion:\nhow many?")
    assert mock_gateway.chat(req).content == mock_gateway.chat(req).content


def test_record_then_replay(tmp_path):
    cassette_path = tmp_path / "c.jsonl"
    recorder = ModelGateway(GatewayConfig(mode="mock", cassette_path=str(cassette_path), seed=3))
    req = _req("### TASK: GENERATE\n\nCREATE TABLE t (\n    a\n);")
    recorded = recorder.chat(req)
    vectors = recorder.embed_batch(["alpha", "beta"])

    replayer = ModelGateway(GatewayConfig(mode="replay", cassette_path=str(cassette_path)))
    assert replayer.chat(req).content == recorded.content
    assert replayer.embed_batch(["alpha", "beta"]) == vectors


def test_replay_miss(tmp_path):
    cassette_path = tmp_path / "c.jsonl"
    cassette_path.write_text("")
    gateway = ModelGateway(GatewayConfig(mode="replay", cassette_path=str(cassette_path)))
    with pytest.raises(CassetteMiss):
        gateway.chat(_req("never recorded"))


def test_replay_mode_builds_no_http_client(tmp_path, monkeypatch):
    # replay must not even try the network: poison the http module
    import httpx

    def explode(*args, **kwargs):
        raise AssertionError("network touched in replay mode")

    monkeypatch.setattr(httpx, "post", explode)
    cassette_path = tmp_path / "c.jsonl"
    recorder = ModelGateway(GatewayConfig(mode="mock", cassette_path=str(cassette_path)))
    req = _req("hello")
    expected = recorder.chat(req).content
    replayer = ModelGateway(GatewayConfig(mode="replay", cassette_path=str(cassette_path)))
    assert replayer.chat(req).content == expected


def test_cassette_fifo_per_digest(tmp_path):
    path = tmp_path / "c.jsonl"
    cassette = Cassette(path)
    cassette.record("chat", "d1", {"content": "first", "prompt_tokens": 0, "completion_tokens": 0})
    cassette.record("chat", "d1", {"content": "second", "prompt_tokens": 0, "completion_tokens": 0})
    fresh = Cassette(path)
    assert fresh.lookup("d1")["content"] == "first"
    assert fresh.lookup("d1")["content"] == "second"
    with pytest.raises(CassetteMiss):
        fresh.lookup("d1")


def test_embed_unit_norm(mock_gateway):
    for vec in mock_gateway.embed_batch(["a", "b", "some longer sentence", ""]):
        assert abs(np.linalg.norm(vec) - 1.0) <= 1e-6


def test_embed_identical_texts_identical_vectors(mock_gateway):
    a, b = mock_gateway.embed_batch(["same text", "same text"])
    assert a == b


def test_embed_distinct_texts_not_parallel(mock_gateway):
    a, b = mock_gateway.embed_batch(["a", "b"])
    assert float(np.dot(a, b)) < 1.0


def test_embed_empty_batch_rejected(mock_gateway):
    with pytest.raises(ValueError):
        mock_gateway.embed_batch([])


def test_embed_digest_keyed_by_model_and_dim():
    assert embed_digest("x", "m1", 64) != embed_digest("x", "m2", 64)
    assert embed_digest("x", "m1", 64) != embed_digest("x", "m1", 32)


def test_mock_embedding_stemming_overlap():
    # shared stemmed vocabulary must raise cosine well above unrelated text
    q1 = mock_embedding("How many sodium atoms are in molecules?", 64, 0)
    q2 = mock_embedding("count of sodium atom per molecule", 64, 0)
    q3 = mock_embedding("orchestra rehearsal schedule", 64, 0)
    assert np.dot(q1, q2) > np.dot(q1, q3)


def test_transcripts_written(tmp_path):
    gateway = ModelGateway(
        GatewayConfig(mode="mock", transcript_dir=str(tmp_path / "transcripts"))
    )
    gateway.chat(_req("hello", conversation_id="conv1", agent="parser"))
    files = list((tmp_path / "transcripts").glob("parser-conv1.jsonl"))
    assert len(files) == 1
    entry = json.loads(files[0].read_text().splitlines()[0])
    assert entry["agent"] == "parser"
    assert entry["messages"][0][1] == "hello"


def test_unknown_mode_rejected():
    with pytest.raises(ValueError):
        GatewayConfig(mode="telepathy")
