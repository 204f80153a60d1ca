"""Newline-delimited JSON oracle server wrapping a registered torch model.

One JSON object per line, UTF-8. A hello request is answered with the class
count and input shape as [w, h, c]; a classify request carries base64 raw
little-endian f32 pixels, row-major channel-last, in [0, 1]. The model's
canonical normalization is applied here, never by the client. Every request
line gets exactly one reply line; failures (bad JSON, bad payload, model
exception) become an error object echoing the request id and the process
keeps serving. All logging goes to stderr so stdio mode keeps stdout clean
for the protocol.
"""

from __future__ import annotations

import base64
import json
import logging
import socketserver
import sys
import time
from dataclasses import dataclass

import numpy as np
import torch

from .registry import get_spec, load_model

PROTOCOL_VERSION = 1

log = logging.getLogger("oracle_bridge")


@dataclass(frozen=True)
class BridgeConfig:
    model_id: str
    listen: str  # "tcp:<host>:<port>" or "stdio"
    device: str = "cpu"
    input_shape: tuple[int, int, int] | None = None  # (w, h, c); default from registry


def parse_listen(listen: str) -> tuple[str, str, int] | tuple[str]:
    """-> ("tcp", host, port) or ("stdio",)."""
    kind, _, rest = listen.partition(":")
    if kind == "tcp":
        host, _, port = rest.rpartition(":")
        if not host or not port.isdigit():
            raise ValueError(f"bad tcp listen spec {listen!r}, want tcp:<host>:<port>")
        return ("tcp", host, int(port))
    if kind == "stdio":
        if rest:
            raise ValueError("stdio listen spec takes no argument")
        return ("stdio",)
    raise ValueError(f"unknown listen kind {kind!r}, want tcp or stdio")


class RequestProcessor:
    """Stateless per-line request handling shared by the TCP and stdio front ends."""

    def __init__(self, cfg: BridgeConfig):
        spec = get_spec(cfg.model_id)
        if cfg.input_shape is not None and tuple(cfg.input_shape) != spec.input_shape:
            raise ValueError(
                f"input shape {cfg.input_shape} does not match "
                f"{spec.model_id}'s {spec.input_shape}"
            )
        self.model, self.spec, self.checksum = load_model(cfg.model_id, cfg.device)
        self.device = cfg.device
        c = self.spec.input_shape[2]
        self._mean = torch.tensor(self.spec.mean, dtype=torch.float32, device=cfg.device).view(c, 1, 1)
        self._std = torch.tensor(self.spec.std, dtype=torch.float32, device=cfg.device).view(c, 1, 1)
        log.info(
            "loaded model=%s classes=%d shape=%s sha256=%s device=%s",
            self.spec.model_id, self.spec.num_classes, list(self.spec.input_shape),
            self.checksum, cfg.device,
        )

    def handle_line(self, line: str) -> str:
        """One request line in, exactly one reply line out (no trailing newline)."""
        start = time.perf_counter()
        reply = self._dispatch(line)
        ms = (time.perf_counter() - start) * 1e3
        log.info("%s id=%s -> %s (%.2f ms)",
                 reply.get("_req_op", "?"), reply.get("id"), reply["op"], ms)
        reply.pop("_req_op", None)
        return json.dumps(reply)

    def _dispatch(self, line: str) -> dict:
        try:
            req = json.loads(line)
        except json.JSONDecodeError:
            return {"op": "error", "id": None, "message": "request is not valid JSON"}
        if not isinstance(req, dict):
            return {"op": "error", "id": None, "message": "request is not a JSON object"}
        req_id = req.get("id")
        if not isinstance(req_id, int) or isinstance(req_id, bool):
            req_id = None
        op = req.get("op")
        if op == "hello":
            return self._hello(req)
        if op == "classify":
            return self._classify(req, req_id)
        return {"op": "error", "id": req_id, "message": f"unknown op {op!r}", "_req_op": op}

    def _hello(self, req: dict) -> dict:
        if req.get("version") != PROTOCOL_VERSION:
            return {
                "op": "error", "id": None,
                "message": f"unsupported protocol version {req.get('version')!r}",
                "_req_op": "hello",
            }
        log.info("handshake model=%s sha256=%s", self.spec.model_id, self.checksum)
        return {
            "op": "hello",
            "version": PROTOCOL_VERSION,
            "classes": self.spec.num_classes,
            "shape": list(self.spec.input_shape),
            "_req_op": "hello",
        }

    def _classify(self, req: dict, req_id: int | None) -> dict:
        def err(message: str) -> dict:
            return {"op": "error", "id": req_id, "message": message, "_req_op": "classify"}

        if req_id is None:
            return err("classify needs an integer id")
        if req.get("dtype") != "f32le":
            return err(f"unsupported dtype {req.get('dtype')!r}")
        w, h, c = self.spec.input_shape
        shape = req.get("shape")
        if not self._shape_ints(shape) or shape != [w, h, c]:
            return err(f"shape {shape!r} does not match expected {[w, h, c]}")
        data = req.get("data")
        if not isinstance(data, str):
            return err("data must be a base64 string")
        try:
            raw = base64.b64decode(data, validate=True)
        except (ValueError, TypeError):
            return err("data is not valid base64")
        if len(raw) != w * h * c * 4:
            return err(f"payload is {len(raw)} bytes, expected {w * h * c * 4}")
        arr = np.frombuffer(raw, dtype="<f4").reshape(h, w, c).copy()
        try:
            label = self._infer(arr)
        except Exception as exc:  # model failure must not kill the server
            log.exception("inference failed for id=%s", req_id)
            return err(f"inference failed: {exc}")
        return {"op": "label", "id": req_id, "label": label, "_req_op": "classify"}

    @staticmethod
    def _shape_ints(shape) -> bool:
        return (isinstance(shape, list) and len(shape) == 3
                and all(isinstance(v, int) and not isinstance(v, bool) for v in shape))

    def _infer(self, img_hwc: np.ndarray) -> int:
        t = torch.from_numpy(img_hwc).to(self.device)
        t = (t.permute(2, 0, 1) - self._mean) / self._std
        with torch.inference_mode():
            logits = self.model(t.unsqueeze(0))
        return int(logits.argmax(dim=1).item())


class _Handler(socketserver.StreamRequestHandler):
    def handle(self) -> None:
        # one request in flight per connection: read, answer, then read again
        processor: RequestProcessor = self.server.processor  # type: ignore[attr-defined]
        peer = "%s:%d" % self.client_address[:2]
        log.info("connection from %s", peer)
        while True:
            raw = self.rfile.readline()
            if not raw:
                break
            line = raw.decode("utf-8", errors="replace").strip()
            if not line:
                continue
            self.wfile.write(processor.handle_line(line).encode("utf-8") + b"\n")
        log.info("connection from %s closed", peer)


class BridgeServer(socketserver.ThreadingTCPServer):
    allow_reuse_address = True
    daemon_threads = True

    def __init__(self, address: tuple[str, int], processor: RequestProcessor):
        super().__init__(address, _Handler)
        self.processor = processor


def create_tcp_server(cfg: BridgeConfig, processor: RequestProcessor | None = None) -> BridgeServer:
    parsed = parse_listen(cfg.listen)
    if parsed[0] != "tcp":
        raise ValueError("create_tcp_server needs a tcp listen spec")
    return BridgeServer((parsed[1], parsed[2]), processor or RequestProcessor(cfg))


def serve_stdio(processor: RequestProcessor) -> None:
    out = sys.stdout.buffer
    for raw in sys.stdin.buffer:
        line = raw.decode("utf-8", errors="replace").strip()
        if not line:
            continue
        out.write(processor.handle_line(line).encode("utf-8") + b"\n")
        out.flush()


def serve(cfg: BridgeConfig) -> None:
    """Blocking entry point: serve until stdin closes (stdio) or forever (tcp)."""
    parsed = parse_listen(cfg.listen)
    processor = RequestProcessor(cfg)
    if parsed[0] == "stdio":
        serve_stdio(processor)
        return
    with BridgeServer((parsed[1], parsed[2]), processor) as srv:
        log.info("listening on %s:%d", *srv.server_address[:2])
        srv.serve_forever()
