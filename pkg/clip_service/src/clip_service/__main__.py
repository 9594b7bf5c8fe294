"""Run the service: python -m clip_service [--host H] [--port P] [--model ID]."""

from __future__ import annotations

import argparse

import uvicorn

from .app import create_app
from .palette import MODEL_ID


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(prog="clip-service")
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=8750)
    parser.add_argument("--model", default=MODEL_ID)
    args = parser.parse_args(argv)
    uvicorn.run(create_app(args.model), host=args.host, port=args.port, log_level="info")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
