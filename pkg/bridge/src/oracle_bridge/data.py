"""Synthetic 10-class image distribution the committed weights were fitted on.

Each class is a fixed blocky color field: a seeded 4x4x3 coarse grid upsampled
8x, so classes are separated by low-frequency structure and a sample is its
prototype plus pixel noise, clipped back to [0, 1].
"""

from __future__ import annotations

import numpy as np

IMAGE_SHAPE = (32, 32, 3)  # (h, w, c)
NUM_CLASSES = 10
PROTOTYPE_SEED = 7
NOISE_SIGMA = 0.08


def class_prototypes() -> np.ndarray:
    rng = np.random.default_rng(PROTOTYPE_SEED)
    coarse = rng.uniform(0.15, 0.85, size=(NUM_CLASSES, 4, 4, 3))
    return np.kron(coarse, np.ones((1, 8, 8, 1)))


def sample_images(n: int, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """n samples cycling through the classes; returns (images, labels)."""
    rng = np.random.default_rng(seed)
    protos = class_prototypes()
    labels = np.arange(n) % NUM_CLASSES
    noise = NOISE_SIGMA * rng.standard_normal((n,) + IMAGE_SHAPE)
    images = np.clip(protos[labels] + noise, 0.0, 1.0)
    return images, labels
