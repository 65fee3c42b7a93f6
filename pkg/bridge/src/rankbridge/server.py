"""HTTP and stdio front ends for a bridge backend.

Every request gets a well-formed JSON response: malformed bodies, unknown
ops, and backend failures all answer ok=false with a message, never a
dropped connection. The server keeps no state between requests.
"""

from __future__ import annotations

import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

from .backends import build_backend
from .protocol import BridgeRequest, BridgeResponse, ProtocolError


def _respond(backend, raw: bytes) -> BridgeResponse:
    try:
        request = BridgeRequest.from_json(raw.decode("utf-8", errors="strict"))
    except (ProtocolError, UnicodeDecodeError) as exc:
        return BridgeResponse(ok=False, error=f"bad request: {exc}")
    try:
        return backend.handle(request)
    except Exception as exc:  # backend bugs still answer, never disconnect
        return BridgeResponse(ok=False, error=f"backend failure: {exc}")


class _BridgeHandler(BaseHTTPRequestHandler):
    backend = None

    def _send(self, response: BridgeResponse):
        payload = response.to_json().encode("utf-8")
        self.send_response(200)
        self.send_header("Content-Type", "application/json")
        self.send_header("Content-Length", str(len(payload)))
        self.end_headers()
        self.wfile.write(payload)

    def do_POST(self):
        length = int(self.headers.get("Content-Length", 0))
        raw = self.rfile.read(length)
        self._send(_respond(self.backend, raw))

    def do_GET(self):
        self._send(BridgeResponse(ok=False, error="POST a JSON request body"))

    def log_message(self, *args):
        pass


def make_server(backend, host: str = "127.0.0.1", port: int = 0) -> ThreadingHTTPServer:
    handler = type("BoundHandler", (_BridgeHandler,), {"backend": backend})
    return ThreadingHTTPServer((host, port), handler)


def endpoint_of(server: ThreadingHTTPServer) -> str:
    host, port = server.server_address[:2]
    return f"http://{host}:{port}/"


def start_in_thread(server: ThreadingHTTPServer) -> threading.Thread:
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    return thread


def serve(model_config: dict, port: int = 0, host: str = "127.0.0.1") -> ThreadingHTTPServer:
    """Build the configured backend and return a ready (unstarted) server.

    Raises with a diagnostic if the configured models cannot be loaded.
    Call ``serve_forever()`` (or ``start_in_thread``) on the result.
    """
    backend = build_backend(model_config)
    return make_server(backend, host=host, port=port)


def mock_serve(fixture_table: dict, port: int = 0, host: str = "127.0.0.1") -> ThreadingHTTPServer:
    """A running endpoint answering from canned responses (test double)."""
    server = serve({"kind": "fixture", "table": fixture_table}, port=port, host=host)
    start_in_thread(server)
    return server


def stdio_serve(backend, stdin, stdout) -> int:
    """Line-delimited request/response loop for socketless environments."""
    handled = 0
    for line in stdin:
        line = line.strip()
        if not line:
            continue
        response = _respond(backend, line.encode("utf-8"))
        stdout.write(response.to_json() + "\n")
        stdout.flush()
        handled += 1
    return handled
