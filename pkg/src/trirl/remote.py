"""Client side of the newline-delimited JSON oracle protocol.

Handshake: send {"op":"hello","version":1}; the server replies with its class
count and tensor shape as [w, h, c]. Each classify request carries the image as
base64 raw little-endian f32, row-major channel-last, and is answered by a
label or an error object echoing the request id. One JSON object per line,
UTF-8, over TCP or a spawned subprocess's stdio.

Transport failures (refused connection, timeout, dropped pipe) are retried
with a fresh connection up to the attempt limit and surface as TransportError;
malformed or out-of-contract replies surface as ProtocolError immediately.
Neither is BudgetExhausted: a failed call never consumes attack budget.
"""

from __future__ import annotations

import base64
import json
import os
import selectors
import shlex
import socket
import subprocess

import numpy as np

from .oracle import Oracle
from .tensor import as_image

PROTOCOL_VERSION = 1
DEFAULT_TIMEOUT = 30.0


class RemoteOracleError(RuntimeError):
    """Base class for remote-oracle failures."""


class TransportError(RemoteOracleError):
    """Connection refused, timed out, or dropped mid-exchange."""


class ProtocolError(RemoteOracleError):
    """Reply violated the wire contract (bad JSON, wrong id, bad label...)."""


class TcpTransport:
    def __init__(self, host: str, port: int, timeout: float = DEFAULT_TIMEOUT):
        self.host, self.port, self.timeout = host, port, timeout
        self._sock: socket.socket | None = None
        self._rfile = None

    def connect(self) -> None:
        try:
            self._sock = socket.create_connection((self.host, self.port), timeout=self.timeout)
        except OSError as exc:
            raise TransportError(f"connect to {self.host}:{self.port} failed: {exc}") from exc
        self._sock.settimeout(self.timeout)
        self._rfile = self._sock.makefile("rb")

    def send_line(self, line: str) -> None:
        if self._sock is None:
            raise TransportError("not connected")
        try:
            self._sock.sendall(line.encode("utf-8") + b"\n")
        except OSError as exc:
            raise TransportError(f"send failed: {exc}") from exc

    def recv_line(self) -> str:
        if self._rfile is None:
            raise TransportError("not connected")
        try:
            raw = self._rfile.readline()
        except OSError as exc:
            raise TransportError(f"recv failed: {exc}") from exc
        if not raw:
            raise TransportError("connection closed mid-exchange")
        return raw.decode("utf-8")

    def close(self) -> None:
        for obj in (self._rfile, self._sock):
            if obj is not None:
                try:
                    obj.close()
                except OSError:
                    pass
        self._rfile = self._sock = None


class StdioTransport:
    """Spawn the command once and speak over its stdin/stdout."""

    def __init__(self, command: str, timeout: float = DEFAULT_TIMEOUT):
        self.command, self.timeout = command, timeout
        self._proc: subprocess.Popen | None = None

    def connect(self) -> None:
        try:
            self._proc = subprocess.Popen(
                shlex.split(self.command),
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                bufsize=0,
            )
        except OSError as exc:
            raise TransportError(f"spawn {self.command!r} failed: {exc}") from exc

    def send_line(self, line: str) -> None:
        if self._proc is None or self._proc.stdin is None:
            raise TransportError("not connected")
        try:
            self._proc.stdin.write(line.encode("utf-8") + b"\n")
            self._proc.stdin.flush()
        except (OSError, ValueError) as exc:
            raise TransportError(f"send failed: {exc}") from exc

    def recv_line(self) -> str:
        if self._proc is None or self._proc.stdout is None:
            raise TransportError("not connected")
        fd = self._proc.stdout.fileno()
        sel = selectors.DefaultSelector()
        sel.register(self._proc.stdout, selectors.EVENT_READ)
        buf = bytearray()
        try:
            while True:
                if not sel.select(self.timeout):
                    raise TransportError(f"read timed out after {self.timeout}s")
                chunk = os.read(fd, 65536)
                if not chunk:
                    raise TransportError("subprocess closed stdout mid-exchange")
                buf.extend(chunk)
                nl = buf.find(b"\n")
                if nl >= 0:
                    # requests are strictly serialized, so at most one reply is in flight
                    if nl != len(buf) - 1:
                        raise ProtocolError("more than one reply line for a single request")
                    return buf[: nl + 1].decode("utf-8")
        finally:
            sel.close()

    def close(self) -> None:
        if self._proc is None:
            return
        for stream in (self._proc.stdin, self._proc.stdout):
            if stream is not None:
                try:
                    stream.close()
                except OSError:
                    pass
        self._proc.terminate()
        try:
            self._proc.wait(timeout=5.0)
        except subprocess.TimeoutExpired:
            self._proc.kill()
            self._proc.wait()
        self._proc = None


class RemoteOracle(Oracle):
    """Hard-label oracle backed by a bridge process across the wire."""

    def __init__(self, transport, max_attempts: int = 3):
        self._transport = transport
        self._max_attempts = max_attempts
        self._next_id = 0
        self._connected = False
        self._handshake()
        self.num_classes = self._classes
        self.shape = self._shape

    def _connect(self) -> None:
        self._transport.connect()
        self._connected = True

    def _handshake(self) -> None:
        last: Exception | None = None
        for _ in range(self._max_attempts):
            try:
                self._connect()
                self._transport.send_line(json.dumps({"op": "hello", "version": PROTOCOL_VERSION}))
                reply = self._parse(self._transport.recv_line())
                break
            except TransportError as exc:
                last = exc
                self._transport.close()
                self._connected = False
        else:
            raise TransportError(f"handshake failed after {self._max_attempts} attempts: {last}")
        if reply.get("op") != "hello" or reply.get("version") != PROTOCOL_VERSION:
            raise ProtocolError(f"bad handshake reply: {reply!r}")
        try:
            self._classes = int(reply["classes"])
            w, h, c = (int(v) for v in reply["shape"])
        except (KeyError, TypeError, ValueError) as exc:
            raise ProtocolError(f"bad handshake fields: {reply!r}") from exc
        if self._classes < 2 or min(w, h, c) < 1:
            raise ProtocolError(f"nonsensical handshake values: {reply!r}")
        self._shape = (h, w, c)

    @staticmethod
    def _parse(line: str) -> dict:
        try:
            obj = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ProtocolError(f"reply is not valid JSON: {line!r}") from exc
        if not isinstance(obj, dict):
            raise ProtocolError(f"reply is not a JSON object: {line!r}")
        return obj

    def label(self, img: np.ndarray) -> int:
        img = as_image(img)
        h, w, c = img.shape
        req_id = self._next_id
        self._next_id += 1
        request = json.dumps(
            {
                "op": "classify",
                "id": req_id,
                "dtype": "f32le",
                "shape": [w, h, c],
                "data": base64.b64encode(img.astype("<f4").tobytes(order="C")).decode("ascii"),
            }
        )
        last: Exception | None = None
        for _ in range(self._max_attempts):
            try:
                if not self._connected:
                    self._connect()
                self._transport.send_line(request)
                reply = self._parse(self._transport.recv_line())
                return self._check_reply(reply, req_id)
            except TransportError as exc:
                last = exc
                self._transport.close()
                self._connected = False
        raise TransportError(f"classify failed after {self._max_attempts} attempts: {last}")

    def _check_reply(self, reply: dict, req_id: int) -> int:
        if reply.get("op") == "error":
            raise ProtocolError(f"bridge error for id {reply.get('id')}: {reply.get('message')}")
        if reply.get("op") != "label" or reply.get("id") != req_id:
            raise ProtocolError(f"unexpected reply for id {req_id}: {reply!r}")
        label = reply.get("label")
        if not isinstance(label, int) or isinstance(label, bool) or not 0 <= label < self._classes:
            raise ProtocolError(f"label out of declared range [0, {self._classes}): {label!r}")
        return label

    def close(self) -> None:
        self._transport.close()
        self._connected = False


def remote_oracle(endpoint: str, timeout: float = DEFAULT_TIMEOUT) -> RemoteOracle:
    """Build from an endpoint spec: `tcp:<host>:<port>` or `stdio:<command>`."""
    kind, _, rest = endpoint.partition(":")
    if kind == "tcp":
        host, _, port = rest.rpartition(":")
        if not host or not port.isdigit():
            raise ValueError(f"bad tcp endpoint {endpoint!r}, want tcp:<host>:<port>")
        return RemoteOracle(TcpTransport(host, int(port), timeout))
    if kind == "stdio":
        if not rest:
            raise ValueError("stdio endpoint needs a command")
        return RemoteOracle(StdioTransport(rest, timeout))
    raise ValueError(f"unknown endpoint kind {kind!r}, want tcp or stdio")
