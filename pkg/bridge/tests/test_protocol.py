import pytest

from rankbridge.protocol import (
    BridgeRequest,
    BridgeResponse,
    ProtocolError,
    fixture_key,
)

REQUEST_CASES = [
    BridgeRequest("nsp", {"text_a": "The cat sat.", "text_b": "It slept."}),
    BridgeRequest(
        "infill",
        {"left": "what is a dog? it is known that", "right": "dogs are", "max_words": 12, "num_samples": 3, "seed": 7},
    ),
    BridgeRequest("rel", {"query": "what is a dog?", "document": "dogs are animals."}),
]

RESPONSE_CASES = [
    BridgeResponse(ok=True, result=0.42),
    BridgeResponse(ok=True, result=["one sentence.", "another one."]),
    BridgeResponse(ok=True, result=1.875),
    BridgeResponse(ok=False, error="no model loaded"),
]


@pytest.mark.parametrize("request_obj", REQUEST_CASES)
def test_request_round_trip_identity(request_obj):
    assert BridgeRequest.from_json(request_obj.to_json()) == request_obj


@pytest.mark.parametrize("response_obj", RESPONSE_CASES)
def test_response_round_trip_identity(response_obj):
    assert BridgeResponse.from_json(response_obj.to_json()) == response_obj


def test_request_validation():
    with pytest.raises(ProtocolError):
        BridgeRequest("teleport", {}).validate()
    with pytest.raises(ProtocolError):
        BridgeRequest("nsp", {"text_a": "only one side"}).validate()
    with pytest.raises(ProtocolError):
        BridgeRequest.from_json("this is not json")
    with pytest.raises(ProtocolError):
        BridgeRequest.from_json('{"op": "nsp"}')
    with pytest.raises(ProtocolError):
        BridgeRequest.from_json('{"v": 99, "op": "nsp", "payload": {"text_a": "a", "text_b": "b"}}')


def test_response_exactly_one_of_result_error():
    with pytest.raises(ProtocolError):
        BridgeResponse(ok=True, result=1.0, error="boom")
    with pytest.raises(ProtocolError):
        BridgeResponse(ok=False)
    with pytest.raises(ProtocolError):
        BridgeResponse.from_json('{"ok": true}')
    with pytest.raises(ProtocolError):
        BridgeResponse.from_json('{"ok": true, "result": 1, "error": "x"}')


def test_fixture_key_stable_and_payload_sensitive():
    a = BridgeRequest("nsp", {"text_a": "A.", "text_b": "B."})
    b = BridgeRequest("nsp", {"text_b": "B.", "text_a": "A."})
    c = BridgeRequest("nsp", {"text_a": "A.", "text_b": "C."})
    assert fixture_key(a) == fixture_key(b)  # key order is canonicalized
    assert fixture_key(a) != fixture_key(c)
