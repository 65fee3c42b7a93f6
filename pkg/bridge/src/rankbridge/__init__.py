"""rankbridge: a local model server speaking the bridge JSON protocol."""

from .protocol import BridgeRequest, BridgeResponse, ProtocolError, fixture_key
from .server import mock_serve, serve

__version__ = "0.1.0"

__all__ = [
    "BridgeRequest",
    "BridgeResponse",
    "ProtocolError",
    "fixture_key",
    "mock_serve",
    "serve",
]
