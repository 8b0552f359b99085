import json
import logging

import numpy as np
import pytest

from prc_emo import DataError, ServiceError
from prc_emo.client import (
    ChatClient,
    ChatRequest,
    HttpChatBackend,
    HttpEmbedder,
    ResponseCache,
    StubChatBackend,
    StubEmbedder,
    cache_key,
)


class FakeResponse:
    def __init__(self, status_code, body=None, text=""):
        self.status_code = status_code
        self._body = body
        self.text = text or (json.dumps(body) if body is not None else "")

    def json(self):
        if self._body is None:
            raise ValueError("no body")
        return self._body


class ScriptedSession:
    """requests.Session stand-in replaying a fixed response sequence."""

    def __init__(self, responses):
        self.responses = list(responses)
        self.calls = []

    def post(self, url, json=None, headers=None, timeout=None):
        self.calls.append({"url": url, "json": json, "headers": headers})
        return self.responses.pop(0)


def chat_body(text, prompt_tokens=3, completion_tokens=2):
    return {
        "choices": [{"message": {"content": text}}],
        "usage": {"prompt_tokens": prompt_tokens, "completion_tokens": completion_tokens},
    }


class TestCacheKey:
    def test_identical_requests_same_key(self):
        a = ChatRequest(user_text="hello", model_id="m")
        b = ChatRequest(user_text="hello", model_id="m")
        assert cache_key(a) == cache_key(b)

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"user_text": "other"},
            {"model_id": "m2"},
            {"system_text": "sys"},
            {"temperature": 0.5},
            {"max_output_tokens": 9},
        ],
    )
    def test_any_field_changes_key(self, kwargs):
        base = ChatRequest(user_text="hello", model_id="m")
        changed = ChatRequest(**{"user_text": "hello", "model_id": "m", **kwargs})
        assert cache_key(base) != cache_key(changed)


class TestResponseCache:
    def test_round_trip_and_reload(self, tmp_path):
        path = tmp_path / "cache.jsonl"
        cache = ResponseCache(path)
        from prc_emo.client import TokenUsage

        cache.put("k1", "stored text", TokenUsage(5, 7))
        reloaded = ResponseCache(path)
        text, usage = reloaded.get("k1")
        assert text == "stored text"
        assert (usage.prompt_tokens, usage.completion_tokens) == (5, 7)

    def test_second_call_hits_cache(self, tmp_path):
        client = ChatClient(StubChatBackend(), ResponseCache(tmp_path / "c.jsonl"))
        req = ChatRequest(user_text="any old prompt")
        first = client.chat(req)
        second = client.chat(req)
        assert first.cached is False
        assert second.cached is True
        assert second.text == first.text


class TestStubChat:
    def test_recognition_prompt_returns_first_label(self):
        prompt = (
            "### Label Statement\n"
            "The target utterance is the final history line, spoken by A: \"hi\"\n"
            "Choose exactly one label from: frustrated, happy, sad\n"
            "Answer with the label only.\n"
        )
        text, _ = StubChatBackend().complete(ChatRequest(user_text=prompt))
        assert text == "frustrated"

    def test_deterministic(self):
        backend = StubChatBackend()
        req = ChatRequest(user_text="whatever prompt")
        assert backend.complete(req)[0] == backend.complete(req)[0]

    def test_empty_user_text_rejected(self):
        with pytest.raises(DataError):
            ChatRequest(user_text="")


class TestHttpChat:
    def test_success(self):
        session = ScriptedSession([FakeResponse(200, chat_body("fine"))])
        backend = HttpChatBackend(base_url="http://svc", api_key="sk", session=session)
        client = ChatClient(backend, sleep=lambda s: None)
        resp = client.chat(ChatRequest(user_text="ping", model_id="m1"))
        assert resp.text == "fine"
        assert resp.usage.prompt_tokens == 3
        call = session.calls[0]
        assert call["url"] == "http://svc/chat/completions"
        assert call["json"]["model"] == "m1"
        assert call["headers"]["Authorization"] == "Bearer sk"

    def test_retries_then_succeeds(self, caplog):
        session = ScriptedSession(
            [FakeResponse(500), FakeResponse(500), FakeResponse(200, chat_body("ok"))]
        )
        backend = HttpChatBackend(base_url="http://svc", session=session)
        client = ChatClient(backend, max_retries=3, backoff_s=0.01, sleep=lambda s: None)
        with caplog.at_level(logging.WARNING, logger="prc_emo.client"):
            resp = client.chat(ChatRequest(user_text="ping"))
        assert resp.text == "ok"
        retries = [r for r in caplog.records if "retry" in r.message]
        assert len(retries) == 2

    def test_retries_exhausted(self):
        session = ScriptedSession([FakeResponse(503)] * 3)
        backend = HttpChatBackend(base_url="http://svc", session=session)
        client = ChatClient(backend, max_retries=2, sleep=lambda s: None)
        with pytest.raises(ServiceError, match="giving up"):
            client.chat(ChatRequest(user_text="ping"))

    def test_retried_payloads_identical(self):
        session = ScriptedSession([FakeResponse(500), FakeResponse(200, chat_body("ok"))])
        backend = HttpChatBackend(base_url="http://svc", session=session)
        ChatClient(backend, sleep=lambda s: None).chat(ChatRequest(user_text="ping"))
        assert session.calls[0]["json"] == session.calls[1]["json"]

    def test_auth_failure_not_retried(self):
        session = ScriptedSession([FakeResponse(401)])
        backend = HttpChatBackend(base_url="http://svc", session=session)
        client = ChatClient(backend, sleep=lambda s: None)
        with pytest.raises(ServiceError, match="authentication"):
            client.chat(ChatRequest(user_text="ping"))
        assert len(session.calls) == 1

    def test_malformed_body(self):
        session = ScriptedSession([FakeResponse(200, {"nonsense": True})])
        backend = HttpChatBackend(base_url="http://svc", session=session)
        with pytest.raises(ServiceError, match="malformed"):
            ChatClient(backend, sleep=lambda s: None).chat(ChatRequest(user_text="x"))

    def test_requires_endpoint(self, monkeypatch):
        monkeypatch.delenv("PRC_EMO_API_BASE", raising=False)
        with pytest.raises(ServiceError, match="PRC_EMO_API_BASE"):
            HttpChatBackend()


class TestConcurrencyBound:
    def test_in_flight_requests_capped(self):
        import threading

        class GatedBackend:
            def __init__(self):
                self.active = 0
                self.peak = 0
                self.lock = threading.Lock()

            def complete(self, req):
                with self.lock:
                    self.active += 1
                    self.peak = max(self.peak, self.active)
                import time as _time

                _time.sleep(0.01)
                with self.lock:
                    self.active -= 1
                from prc_emo.client import TokenUsage

                return "ok", TokenUsage()

        backend = GatedBackend()
        client = ChatClient(backend, max_concurrency=4)
        threads = [
            threading.Thread(
                target=lambda i=i: client.chat(ChatRequest(user_text=f"req {i}"))
            )
            for i in range(16)
        ]
        for t in threads:
            t.start()
        for t in threads:
            t.join()
        assert backend.peak <= 4


class TestStubEmbedder:
    def test_identical_strings_identical_vectors(self):
        embedder = StubEmbedder()
        out = embedder.embed(["same text", "same text"])
        assert np.array_equal(out[0], out[1])

    def test_distinct_strings_distinct_vectors(self):
        embedder = StubEmbedder()
        out = embedder.embed(["a", "b"])
        assert out.shape == (2, 256)
        assert not np.array_equal(out[0], out[1])

    def test_empty_input_rejected(self):
        with pytest.raises(DataError):
            StubEmbedder().embed([])

    def test_nonzero_norm_even_for_symbol_text(self):
        out = StubEmbedder(dim=8).embed(["!!!", "???"])
        assert np.linalg.norm(out[0]) > 0
        assert np.linalg.norm(out[1]) > 0


class TestHttpEmbedder:
    def embed_body(self, rows):
        return {"data": [{"embedding": r} for r in rows]}

    def test_order_and_dim(self):
        session = ScriptedSession([FakeResponse(200, self.embed_body([[1, 0], [0, 1]]))])
        embedder = HttpEmbedder(base_url="http://svc", session=session, sleep=lambda s: None)
        out = embedder.embed(["a", "b"])
        assert out.shape == (2, 2)
        assert embedder.dim == 2

    def test_dimension_drift_rejected(self):
        session = ScriptedSession(
            [
                FakeResponse(200, self.embed_body([[1, 0]])),
                FakeResponse(200, self.embed_body([[1, 0, 0]])),
            ]
        )
        embedder = HttpEmbedder(base_url="http://svc", session=session, sleep=lambda s: None)
        embedder.embed(["a"])
        with pytest.raises(ServiceError, match="drift"):
            embedder.embed(["b"])

    def test_count_mismatch_rejected(self):
        session = ScriptedSession([FakeResponse(200, self.embed_body([[1, 0]]))])
        embedder = HttpEmbedder(base_url="http://svc", session=session, sleep=lambda s: None)
        with pytest.raises(ServiceError, match="vectors for"):
            embedder.embed(["a", "b"])
