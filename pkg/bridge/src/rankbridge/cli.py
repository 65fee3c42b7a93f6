"""Command-line entry point: run a bridge server."""

from __future__ import annotations

import argparse
import json
import sys

from .backends import build_backend
from .server import endpoint_of, serve, stdio_serve


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="rankbridge", description="Serve the bridge JSON protocol."
    )
    parser.add_argument("--port", type=int, default=8752, help="listen port (HTTP mode)")
    parser.add_argument("--host", default="127.0.0.1", help="listen host (HTTP mode)")
    parser.add_argument(
        "--fixture", default=None, help="canned-response table (JSON file); fixture backend"
    )
    parser.add_argument(
        "--model-config", default=None, help="backend configuration as a JSON file"
    )
    parser.add_argument(
        "--stdio", action="store_true", help="serve line-delimited JSON on stdin/stdout"
    )
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    if args.model_config:
        model_config = json.loads(open(args.model_config, encoding="utf-8").read())
    elif args.fixture:
        model_config = {"kind": "fixture", "path": args.fixture}
    else:
        model_config = {"kind": "fixture", "table": {}}
    try:
        if args.stdio:
            backend = build_backend(model_config)
            stdio_serve(backend, sys.stdin, sys.stdout)
            return 0
        server = serve(model_config, port=args.port, host=args.host)
    except RuntimeError as exc:
        print(f"startup failure: {exc}", file=sys.stderr)
        return 2
    print(f"serving on {endpoint_of(server)}", file=sys.stderr)
    try:
        server.serve_forever()
    except KeyboardInterrupt:
        pass
    return 0


if __name__ == "__main__":
    sys.exit(main())
