"""Request handlers behind the bridge endpoint."""

from __future__ import annotations

import json
from pathlib import Path

from .protocol import BridgeRequest, BridgeResponse, fixture_key


class FixtureBackend:
    """Deterministic canned responses keyed by request hash.

    The table maps fixture keys to result values (or to
    ``{"error": message}`` entries for canned failures). Unknown requests
    answer ok=false so integration tests can exercise the client's error
    path without a dropped connection.
    """

    def __init__(self, table: dict):
        self.table = dict(table)

    @classmethod
    def from_file(cls, path) -> "FixtureBackend":
        return cls(json.loads(Path(path).read_text(encoding="utf-8")))

    def handle(self, request: BridgeRequest) -> BridgeResponse:
        key = fixture_key(request)
        if key not in self.table:
            return BridgeResponse(
                ok=False, error=f"unknown fixture request (op={request.op}, key={key[:12]})"
            )
        entry = self.table[key]
        if isinstance(entry, dict) and "error" in entry:
            return BridgeResponse(ok=False, error=str(entry["error"]))
        return BridgeResponse(ok=True, result=entry)


class NeuralBackend:
    """Optional real-model backend behind lazy imports.

    Loads a fill-mask generator, a next-sentence classifier, and a
    cross-encoder through the transformers library when it is installed;
    construction fails with a diagnostic otherwise. Kept deliberately thin:
    this process exists so the attack toolkit itself never needs deep
    learning dependencies.
    """

    def __init__(self, model_config: dict):  # pragma: no cover - needs models
        try:
            from transformers import pipeline as hf_pipeline
        except ImportError as exc:
            raise RuntimeError(
                "neural backend requires the 'transformers' package "
                "(pip install rankbridge[neural])"
            ) from exc
        self._infill = hf_pipeline("fill-mask", model=model_config.get("infill_model", "bert-base-uncased"))
        self._nsp = None  # next-sentence head loaded on first use
        self._rel = None
        self._config = model_config

    def handle(self, request: BridgeRequest) -> BridgeResponse:  # pragma: no cover
        if request.op == "infill":
            payload = request.payload
            template = f"{payload['left']} {self._infill.tokenizer.mask_token} {payload['right']}"
            fills = self._infill(template, top_k=int(payload["num_samples"]))
            return BridgeResponse(ok=True, result=[f["token_str"].strip() for f in fills])
        return BridgeResponse(
            ok=False, error=f"op {request.op!r} not configured on this neural backend"
        )


def build_backend(model_config: dict):
    kind = model_config.get("kind", "fixture")
    if kind == "fixture":
        if "path" in model_config:
            return FixtureBackend.from_file(model_config["path"])
        return FixtureBackend(model_config.get("table", {}))
    if kind == "neural":
        return NeuralBackend(model_config)
    raise RuntimeError(f"unknown backend kind {kind!r}")
