"""Command line front end: `bridge --model tiny-cnn --listen tcp:127.0.0.1:9000`."""

from __future__ import annotations

import argparse
import logging
import sys

from .registry import REGISTRY
from .server import BridgeConfig, parse_listen, serve


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="bridge",
        description="serve a registered image classifier over the line-JSON oracle protocol",
    )
    parser.add_argument("--model", required=True, choices=sorted(REGISTRY),
                        help="registered model id")
    parser.add_argument("--listen", required=True,
                        help="tcp:<host>:<port> or stdio")
    parser.add_argument("--device", default="cpu", help="torch device (default: cpu)")
    parser.add_argument("--log-level", default="info",
                        choices=["debug", "info", "warning", "error"])
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    # stdout may carry the protocol (stdio mode), so logs always go to stderr
    logging.basicConfig(
        stream=sys.stderr,
        level=getattr(logging, args.log_level.upper()),
        format="%(asctime)s %(name)s %(levelname)s %(message)s",
    )
    try:
        parse_listen(args.listen)
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    cfg = BridgeConfig(model_id=args.model, listen=args.listen, device=args.device)
    try:
        serve(cfg)
    except KeyboardInterrupt:
        pass
    return 0


if __name__ == "__main__":
    sys.exit(main())
