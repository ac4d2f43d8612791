"""Hash embedder properties and the remote wire-protocol client."""

from __future__ import annotations

import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import numpy as np
import pytest

from schemafilter.errors import (
    DimensionMismatchError,
    MalformedResponseError,
    ModelVersionChangedError,
    TransportError,
)
from schemafilter.providers import (
    CachingProvider,
    EmbeddingCache,
    HashProvider,
    RemoteProvider,
    embed,
    hash_embed,
)


def cos(a, b):
    return float(a @ b / (np.linalg.norm(a) * np.linalg.norm(b)))


class TestHashEmbed:
    def test_deterministic_and_unit_norm(self):
        a = hash_embed("count the courses", "Column name: cid", 128)
        b = hash_embed("count the courses", "Column name: cid", 128)
        assert np.array_equal(a, b)
        assert np.linalg.norm(a) == pytest.approx(1.0, abs=1e-12)

    def test_dim_floor(self):
        with pytest.raises(ValueError):
            hash_embed("q", "d", 4)

    def test_self_similarity_is_one(self):
        v = hash_embed("total revenue", "total revenue", 64)
        assert cos(v, v) == pytest.approx(1.0)

    def test_disjoint_token_sets_near_orthogonal(self):
        rng = np.random.default_rng(7)
        worst = 0.0
        for trial in range(1000):
            qa = " ".join(f"qa{trial}x{i}" for i in range(3))
            qb = " ".join(f"qb{trial}y{i}" for i in range(3))
            va = hash_embed(qa, f"Column name: da{trial}", 4096)
            vb = hash_embed(qb, f"Column name: db{trial}", 4096)
            worst = max(worst, abs(cos(va, vb)))
        del rng
        assert worst < 0.1

    def test_distinct_sample_values_distinct_vectors(self):
        # one changed sample value flips the vector; 1e5 distinct inputs, no collision
        seen = set()
        for i in range(100_000):
            v = hash_embed("q", f"Sample values: item{i}", 64)
            seen.add(v.tobytes())
        assert len(seen) == 100_000

    def test_zero_input_maps_to_basis_vector(self):
        v = hash_embed("", "", 32)
        expected = np.zeros(32)
        expected[0] = 1.0
        assert np.array_equal(v, expected)

    def test_shared_tokens_raise_inner_product(self):
        query = "show the quarterly revenue per region"
        self_embedding = hash_embed(query, query, 512)
        sharing = hash_embed(query, "Column name: quarterly revenue", 512)
        disjoint = hash_embed(query, "Column name: internal surrogate key", 512)
        assert cos(self_embedding, sharing) > cos(self_embedding, disjoint) + 0.05


class TestHashProvider:
    def test_batch_equals_map_of_singles(self):
        provider = HashProvider(dim=64)
        items = [("q1", "Column name: a"), ("q2", "Column name: b"), ("q1", "Column name: a")]
        batch = provider.embed_batch(items)
        for row, item in zip(batch, items):
            assert np.array_equal(row, embed(provider, *item))

    def test_empty_batch(self):
        assert HashProvider(dim=16).embed_batch([]).shape == (0, 16)


# ---------------------------------------------------------------------------
# remote provider against a stub server


class _StubHandler(BaseHTTPRequestHandler):
    # behavior injected through server attributes
    def do_POST(self):
        length = int(self.headers["Content-Length"])
        request = json.loads(self.rfile.read(length))
        self.server.calls.append(request)  # type: ignore[attr-defined]
        behavior = self.server.behavior  # type: ignore[attr-defined]
        status, payload = behavior(request, len(self.server.calls))
        body = payload if isinstance(payload, bytes) else json.dumps(payload).encode()
        self.send_response(status)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(body)))
        self.end_headers()
        self.wfile.write(body)

    def log_message(self, *args):
        pass


@pytest.fixture()
def stub_server():
    server = ThreadingHTTPServer(("127.0.0.1", 0), _StubHandler)
    server.calls = []
    server.behavior = lambda request, call_no: (
        200,
        {
            "model_version": "stub-1",
            "results": [
                {"embedding": [float(len(item["document"]))] * 4}
                for item in request["items"]
            ],
        },
    )
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    yield server
    server.shutdown()
    thread.join(timeout=2)


def _provider(server, **kw):
    host, port = server.server_address
    return RemoteProvider(endpoint=f"http://{host}:{port}/score", dim=4, **kw)


class TestRemoteProvider:
    def test_single_item_matches_recorded_payload(self, stub_server):
        provider = _provider(stub_server)
        out = provider.embed_batch([("q", "doc")])
        assert out.shape == (1, 4)
        assert np.array_equal(out[0], np.full(4, 3.0))
        assert provider.model_version == "stub-1"

    def test_empty_batch_makes_no_call(self, stub_server):
        provider = _provider(stub_server)
        assert provider.embed_batch([]).shape == (0, 4)
        assert stub_server.calls == []

    def test_batches_split_and_order_preserved(self, stub_server):
        provider = _provider(stub_server, max_batch=2)
        items = [("q", "d" * (i + 1)) for i in range(5)]
        out = provider.embed_batch(items)
        assert len(stub_server.calls) == 3
        assert [row[0] for row in out] == [1.0, 2.0, 3.0, 4.0, 5.0]

    def test_wrong_dimension_rejected(self, stub_server):
        stub_server.behavior = lambda request, call_no: (
            200,
            {"model_version": "stub-1", "results": [{"embedding": [1.0, 2.0]}]},
        )
        with pytest.raises(DimensionMismatchError):
            _provider(stub_server).embed_batch([("q", "d")])

    def test_malformed_response(self, stub_server):
        stub_server.behavior = lambda request, call_no: (200, b"not json at all")
        with pytest.raises(MalformedResponseError):
            _provider(stub_server, retries=0).embed_batch([("q", "d")])

    def test_model_version_pinned(self, stub_server):
        def behavior(request, call_no):
            return 200, {
                "model_version": f"v{call_no}",
                "results": [{"embedding": [0.0] * 4} for _ in request["items"]],
            }

        stub_server.behavior = behavior
        provider = _provider(stub_server, max_batch=1)
        with pytest.raises(ModelVersionChangedError):
            provider.embed_batch([("q", "a"), ("q", "b")])

    def test_score_batch_logits(self, stub_server):
        stub_server.behavior = lambda request, call_no: (
            200,
            {
                "model_version": "stub-1",
                "results": [{"logit": float(i)} for i, _ in enumerate(request["items"])],
            },
        )
        logits = _provider(stub_server).score_batch([("q", "a"), ("q", "b")])
        assert np.array_equal(logits, np.asarray([0.0, 1.0]))

    def test_transport_error_surfaced(self):
        provider = RemoteProvider(endpoint="http://127.0.0.1:9/none", dim=4, retries=0, timeout=0.2)
        with pytest.raises(TransportError):
            provider.embed_batch([("q", "d")])

    def test_http_error_status(self, stub_server):
        stub_server.behavior = lambda request, call_no: (503, {"error": "down"})
        with pytest.raises(TransportError):
            _provider(stub_server, retries=0).embed_batch([("q", "d")])


class TestCache:
    def test_cache_round_trip_and_hit(self, tmp_path, stub_server):
        inner = _provider(stub_server)
        provider = CachingProvider(inner=inner, cache=EmbeddingCache(tmp_path))
        first = provider.embed_batch([("q", "doc")])
        calls_after_first = len(stub_server.calls)
        second = provider.embed_batch([("q", "doc")])
        assert np.array_equal(first, second)
        assert len(stub_server.calls) == calls_after_first  # served from disk
