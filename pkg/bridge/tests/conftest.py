import base64
import json
import socket
import threading

import numpy as np
import pytest

from oracle_bridge.server import BridgeConfig, BridgeServer, RequestProcessor


@pytest.fixture(scope="session")
def processor() -> RequestProcessor:
    return RequestProcessor(BridgeConfig(model_id="tiny-cnn", listen="tcp:127.0.0.1:0"))


@pytest.fixture()
def bridge_port(processor):
    srv = BridgeServer(("127.0.0.1", 0), processor)
    thread = threading.Thread(target=srv.serve_forever, daemon=True)
    thread.start()
    yield srv.server_address[1]
    srv.shutdown()
    srv.server_close()
    thread.join(timeout=5)


class LineClient:
    """Raw line-JSON client; no retry logic, so tests see the wire verbatim."""

    def __init__(self, port: int, timeout: float = 10.0):
        self.sock = socket.create_connection(("127.0.0.1", port), timeout=timeout)
        self.rfile = self.sock.makefile("rb")

    def send_raw(self, line: str) -> None:
        self.sock.sendall(line.encode("utf-8") + b"\n")

    def send(self, obj: dict) -> None:
        self.send_raw(json.dumps(obj))

    def recv(self) -> dict:
        raw = self.rfile.readline()
        assert raw, "connection closed unexpectedly"
        return json.loads(raw)

    def rt(self, obj: dict) -> dict:
        self.send(obj)
        return self.recv()

    def idle(self, wait: float = 0.05) -> bool:
        """True if no unsolicited bytes arrive within `wait` seconds."""
        self.sock.settimeout(wait)
        try:
            extra = self.sock.recv(1)
        except TimeoutError:
            return True
        finally:
            self.sock.settimeout(10.0)
        return extra == b""

    def close(self) -> None:
        self.rfile.close()
        self.sock.close()


@pytest.fixture()
def client(bridge_port):
    c = LineClient(bridge_port)
    yield c
    c.close()


def encode_image(img: np.ndarray) -> str:
    return base64.b64encode(np.asarray(img).astype("<f4").tobytes(order="C")).decode("ascii")


def classify_req(req_id: int, img: np.ndarray, **overrides) -> dict:
    h, w, c = np.asarray(img).shape
    req = {"op": "classify", "id": req_id, "dtype": "f32le",
           "shape": [w, h, c], "data": encode_image(img)}
    req.update(overrides)
    return req
