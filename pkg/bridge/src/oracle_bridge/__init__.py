"""Line-JSON oracle bridge serving small pretrained image classifiers."""

from .registry import REGISTRY, ModelSpec, get_spec, load_model, weights_checksum
from .server import BridgeConfig, RequestProcessor, create_tcp_server, serve

__all__ = [
    "REGISTRY",
    "ModelSpec",
    "get_spec",
    "load_model",
    "weights_checksum",
    "BridgeConfig",
    "RequestProcessor",
    "create_tcp_server",
    "serve",
]
