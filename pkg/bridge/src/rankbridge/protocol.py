"""The bridge wire protocol: one JSON request in, one JSON response out.

Requests carry a version tag, an operation name, and an op-specific
payload; responses carry exactly one of result or error. Serialization is
canonical (sorted keys), so a request hashes to a stable fixture key.
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass

PROTOCOL_VERSION = 1

REQUIRED_FIELDS = {
    "infill": ("left", "right", "max_words", "num_samples", "seed"),
    "nsp": ("text_a", "text_b"),
    "rel": ("query", "document"),
}


class ProtocolError(ValueError):
    """The message does not conform to the protocol."""


@dataclass(frozen=True)
class BridgeRequest:
    op: str
    payload: dict
    version: int = PROTOCOL_VERSION

    def validate(self) -> "BridgeRequest":
        if self.op not in REQUIRED_FIELDS:
            raise ProtocolError(f"unknown op {self.op!r}")
        missing = [f for f in REQUIRED_FIELDS[self.op] if f not in self.payload]
        if missing:
            raise ProtocolError(f"op {self.op!r} payload missing fields: {missing}")
        return self

    def to_json(self) -> str:
        return json.dumps(
            {"v": self.version, "op": self.op, "payload": self.payload},
            sort_keys=True,
            ensure_ascii=False,
        )

    @classmethod
    def from_json(cls, text) -> "BridgeRequest":
        try:
            obj = json.loads(text)
        except (json.JSONDecodeError, UnicodeDecodeError) as exc:
            raise ProtocolError(f"request is not valid JSON: {exc}") from exc
        if not isinstance(obj, dict):
            raise ProtocolError("request must be a JSON object")
        if "op" not in obj or "payload" not in obj:
            raise ProtocolError("request needs 'op' and 'payload' fields")
        if not isinstance(obj["payload"], dict):
            raise ProtocolError("'payload' must be an object")
        version = obj.get("v", PROTOCOL_VERSION)
        if version != PROTOCOL_VERSION:
            raise ProtocolError(f"unsupported protocol version {version!r}")
        return cls(str(obj["op"]), obj["payload"], version).validate()


@dataclass(frozen=True)
class BridgeResponse:
    ok: bool
    result: object = None
    error: str | None = None
    version: int = PROTOCOL_VERSION

    def __post_init__(self):
        if self.ok and self.error is not None:
            raise ProtocolError("ok responses must not carry an error")
        if not self.ok and self.error is None:
            raise ProtocolError("error responses must carry an error message")

    def to_json(self) -> str:
        body: dict = {"v": self.version, "ok": self.ok}
        if self.ok:
            body["result"] = self.result
        else:
            body["error"] = self.error
        return json.dumps(body, sort_keys=True, ensure_ascii=False)

    @classmethod
    def from_json(cls, text) -> "BridgeResponse":
        try:
            obj = json.loads(text)
        except (json.JSONDecodeError, UnicodeDecodeError) as exc:
            raise ProtocolError(f"response is not valid JSON: {exc}") from exc
        if not isinstance(obj, dict) or "ok" not in obj:
            raise ProtocolError("response needs an 'ok' field")
        has_result = "result" in obj
        has_error = "error" in obj
        if has_result == has_error:
            raise ProtocolError("response must carry exactly one of result/error")
        return cls(
            bool(obj["ok"]),
            obj.get("result"),
            obj.get("error"),
            obj.get("v", PROTOCOL_VERSION),
        )


def fixture_key(request: BridgeRequest) -> str:
    """Stable hash of a request: the lookup key for canned responses."""
    canonical = json.dumps(
        {"op": request.op, "payload": request.payload},
        sort_keys=True,
        ensure_ascii=False,
    )
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()
