import io
import json
import urllib.request

import pytest

from rankbridge.backends import FixtureBackend, build_backend
from rankbridge.protocol import BridgeRequest, BridgeResponse, fixture_key
from rankbridge.server import endpoint_of, mock_serve, stdio_serve


def post(endpoint, body: bytes):
    request = urllib.request.Request(
        endpoint, data=body, headers={"Content-Type": "application/json"}
    )
    with urllib.request.urlopen(request, timeout=5) as response:
        return json.loads(response.read().decode("utf-8"))


@pytest.fixture()
def canned_server():
    nsp = BridgeRequest("nsp", {"text_a": "The cat sat.", "text_b": "It slept."})
    rel = BridgeRequest("rel", {"query": "q", "document": "d"})
    infill = BridgeRequest(
        "infill", {"left": "l", "right": "r", "max_words": 12, "num_samples": 2, "seed": 5}
    )
    table = {
        fixture_key(nsp): 0.42,
        fixture_key(rel): 1.5,
        fixture_key(infill): ["alpha beta.", "gamma delta."],
    }
    server = mock_serve(table)
    yield endpoint_of(server), nsp, rel, infill
    server.shutdown()


def test_canned_responses(canned_server):
    endpoint, nsp, rel, infill = canned_server
    assert post(endpoint, nsp.to_json().encode()) == {"v": 1, "ok": True, "result": 0.42}
    assert post(endpoint, rel.to_json().encode())["result"] == 1.5
    fills = post(endpoint, infill.to_json().encode())["result"]
    assert fills == ["alpha beta.", "gamma delta."]


def test_malformed_body_answers_ok_false(canned_server):
    endpoint = canned_server[0]
    reply = post(endpoint, b"{nonsense")
    assert reply["ok"] is False
    assert "bad request" in reply["error"]


def test_unknown_op_answers_ok_false(canned_server):
    endpoint = canned_server[0]
    reply = post(endpoint, json.dumps({"v": 1, "op": "teleport", "payload": {}}).encode())
    assert reply["ok"] is False


def test_fixture_miss_answers_ok_false(canned_server):
    endpoint = canned_server[0]
    miss = BridgeRequest("nsp", {"text_a": "never seen", "text_b": "before"})
    reply = post(endpoint, miss.to_json().encode())
    assert reply["ok"] is False
    assert "unknown fixture request" in reply["error"]


def test_get_answers_ok_false(canned_server):
    endpoint = canned_server[0]
    with urllib.request.urlopen(endpoint, timeout=5) as response:
        reply = json.loads(response.read().decode("utf-8"))
    assert reply["ok"] is False


def test_canned_error_entries():
    request = BridgeRequest("rel", {"query": "q", "document": "d"})
    backend = FixtureBackend({fixture_key(request): {"error": "model exploded"}})
    response = backend.handle(request)
    assert not response.ok
    assert response.error == "model exploded"


def test_fixture_backend_from_file(tmp_path):
    request = BridgeRequest("nsp", {"text_a": "a", "text_b": "b"})
    path = tmp_path / "table.json"
    path.write_text(json.dumps({fixture_key(request): 0.9}), encoding="utf-8")
    backend = build_backend({"kind": "fixture", "path": str(path)})
    assert backend.handle(request).result == 0.9


def test_build_backend_unknown_kind():
    with pytest.raises(RuntimeError):
        build_backend({"kind": "quantum"})


def test_stdio_mode_round_trip():
    request = BridgeRequest("nsp", {"text_a": "a", "text_b": "b"})
    backend = FixtureBackend({fixture_key(request): 0.25})
    stdin = io.StringIO(request.to_json() + "\n\n{garbage\n")
    stdout = io.StringIO()
    handled = stdio_serve(backend, stdin, stdout)
    assert handled == 2
    lines = stdout.getvalue().splitlines()
    first = BridgeResponse.from_json(lines[0])
    assert first.ok and first.result == 0.25
    second = BridgeResponse.from_json(lines[1])
    assert not second.ok
