"""Model registry: id -> architecture, committed weights, shape, normalization."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass
from importlib import resources
from typing import Callable

import torch

from .model import TinyCnn


@dataclass(frozen=True)
class ModelSpec:
    model_id: str
    builder: Callable[[], torch.nn.Module]
    weights_file: str
    input_shape: tuple[int, int, int]  # (w, h, c), wire order
    num_classes: int
    mean: tuple[float, ...]
    std: tuple[float, ...]


REGISTRY: dict[str, ModelSpec] = {
    "tiny-cnn": ModelSpec(
        model_id="tiny-cnn",
        builder=lambda: TinyCnn(in_channels=3, num_classes=10),
        weights_file="tiny-cnn.pt",
        input_shape=(32, 32, 3),
        num_classes=10,
        mean=(0.5, 0.5, 0.5),
        std=(0.25, 0.25, 0.25),
    ),
}


def get_spec(model_id: str) -> ModelSpec:
    try:
        return REGISTRY[model_id]
    except KeyError:
        known = ", ".join(sorted(REGISTRY))
        raise ValueError(f"unknown model {model_id!r} (known: {known})") from None


def weights_path(spec: ModelSpec):
    return resources.files("oracle_bridge").joinpath("weights", spec.weights_file)


def weights_checksum(spec: ModelSpec) -> str:
    return hashlib.sha256(weights_path(spec).read_bytes()).hexdigest()


def load_model(model_id: str, device: str = "cpu") -> tuple[torch.nn.Module, ModelSpec, str]:
    """Build the model, load committed weights, return (eval-mode model, spec, sha256)."""
    spec = get_spec(model_id)
    path = weights_path(spec)
    if not path.is_file():
        raise FileNotFoundError(
            f"weights for {model_id!r} not found; run `python3 -m oracle_bridge.train`"
        )
    model = spec.builder()
    state = torch.load(str(path), map_location=device, weights_only=True)
    model.load_state_dict(state)
    model.to(device)
    model.eval()
    for p in model.parameters():
        p.requires_grad_(False)
    return model, spec, weights_checksum(spec)
