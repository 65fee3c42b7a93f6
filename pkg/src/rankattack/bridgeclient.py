"""HTTP client for the optional model-server bridge.

The bridge speaks a small versioned JSON protocol over POST: one request
object in, one response object out. The toolkit works fully without it;
plugging it in swaps the builtin scorers for remote ones. The endpoint can
always be overridden through the RANKATTACK_BRIDGE_ENDPOINT environment
variable.
"""

from __future__ import annotations

import json
import os
import urllib.error
import urllib.request
from typing import Sequence

from .corpus import Document, Query, Sentence, join
from .errors import BridgeUnavailable

PROTOCOL_VERSION = 1
ENDPOINT_ENV_VAR = "RANKATTACK_BRIDGE_ENDPOINT"


def resolve_endpoint(configured: str = "") -> str:
    endpoint = os.environ.get(ENDPOINT_ENV_VAR, "") or configured
    if not endpoint:
        raise BridgeUnavailable(
            f"no bridge endpoint configured (set {ENDPOINT_ENV_VAR} or the config key)"
        )
    return endpoint


def render_sentences(sentences: Sequence[Sentence]) -> str:
    """Canonical string form of a sentence sequence sent over the wire."""
    return " ".join(s.raw for s in sentences)


def post_request(endpoint: str, op: str, payload: dict, timeout: float = 10.0, retries: int = 2):
    """POST one bridge request; returns the result value or raises BridgeUnavailable."""
    body = json.dumps(
        {"v": PROTOCOL_VERSION, "op": op, "payload": payload},
        sort_keys=True,
        ensure_ascii=False,
    ).encode("utf-8")
    last_error = None
    for _ in range(retries + 1):
        request = urllib.request.Request(
            endpoint, data=body, headers={"Content-Type": "application/json"}
        )
        try:
            with urllib.request.urlopen(request, timeout=timeout) as response:
                raw = response.read()
        except (urllib.error.URLError, OSError) as exc:
            last_error = exc
            continue
        try:
            reply = json.loads(raw.decode("utf-8"))
        except (UnicodeDecodeError, json.JSONDecodeError) as exc:
            raise BridgeUnavailable(f"malformed bridge response: {exc}") from exc
        if not isinstance(reply, dict) or "ok" not in reply:
            raise BridgeUnavailable("bridge response missing 'ok' field")
        if not reply["ok"]:
            raise BridgeUnavailable(f"bridge error: {reply.get('error', 'unknown')}")
        if "result" not in reply:
            raise BridgeUnavailable("bridge response missing 'result'")
        return reply["result"]
    raise BridgeUnavailable(f"bridge endpoint {endpoint} unreachable: {last_error}")


class BridgeScorer:
    """Adjacency scorer backed by the bridge's next-sentence op.

    Returns the remote value verbatim; scale is normalized downstream.
    """

    def __init__(self, endpoint: str, timeout: float = 10.0, retries: int = 2):
        self.endpoint = endpoint
        self.timeout = timeout
        self.retries = retries

    def score(self, text_a: Sequence[Sentence], text_b: Sequence[Sentence]) -> float:
        result = post_request(
            self.endpoint,
            "nsp",
            {"text_a": render_sentences(text_a), "text_b": render_sentences(text_b)},
            timeout=self.timeout,
            retries=self.retries,
        )
        try:
            return float(result)
        except (TypeError, ValueError) as exc:
            raise BridgeUnavailable(f"non-numeric nsp result: {result!r}") from exc


def bridge_infill(
    endpoint: str,
    left: str,
    right: str,
    max_words: int,
    num_samples: int,
    seed: int,
    timeout: float = 10.0,
    retries: int = 2,
) -> list[Sentence]:
    """Request candidate infill sentences from the bridge's generation op."""
    result = post_request(
        endpoint,
        "infill",
        {
            "left": left,
            "right": right,
            "max_words": max_words,
            "num_samples": num_samples,
            "seed": seed,
        },
        timeout=timeout,
        retries=retries,
    )
    if not isinstance(result, list):
        raise BridgeUnavailable(f"infill result is not a list: {result!r}")
    return [Sentence.from_raw(str(text)) for text in result]


class BridgeRanker:
    """Relevance scorer backed by the bridge's cross-encoder op.

    Duck-compatible with LinearRanker.score, so it can stand in as the
    surrogate for fidelity runs against real models.
    """

    def __init__(self, endpoint: str, timeout: float = 10.0, retries: int = 2):
        self.endpoint = endpoint
        self.timeout = timeout
        self.retries = retries

    def score(self, query: Query, document: Document) -> float:
        result = post_request(
            self.endpoint,
            "rel",
            {"query": query.text, "document": join(document)},
            timeout=self.timeout,
            retries=self.retries,
        )
        try:
            return float(result)
        except (TypeError, ValueError) as exc:
            raise BridgeUnavailable(f"non-numeric rel result: {result!r}") from exc
