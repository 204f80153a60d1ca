"""Deterministic CPU training for the committed tiny-cnn weights.

Run `python3 -m oracle_bridge.train` to regenerate weights/tiny-cnn.pt.
Everything is seeded, so the checksum is reproducible on one platform.
"""

from __future__ import annotations

import pathlib
import sys

import numpy as np
import torch
import torch.nn.functional as F

from .data import NUM_CLASSES, sample_images
from .model import TinyCnn

TRAIN_SEED = 1234
EPOCHS = 30
BATCH = 64
TRAIN_N = 2000
TEST_N = 500
LR = 3e-3


def _to_batch(images: np.ndarray) -> torch.Tensor:
    # training uses the same normalization the server applies at inference time
    t = torch.from_numpy(images.astype(np.float32)).permute(0, 3, 1, 2)
    return (t - 0.5) / 0.25


def train(out_path: pathlib.Path) -> float:
    torch.manual_seed(TRAIN_SEED)
    torch.set_num_threads(1)

    train_x, train_y = sample_images(TRAIN_N, seed=100)
    test_x, test_y = sample_images(TEST_N, seed=200)
    xs = _to_batch(train_x)
    ys = torch.from_numpy(train_y.astype(np.int64))

    model = TinyCnn(in_channels=3, num_classes=NUM_CLASSES)
    opt = torch.optim.Adam(model.parameters(), lr=LR)
    order = torch.randperm(TRAIN_N, generator=torch.Generator().manual_seed(TRAIN_SEED))

    model.train()
    for epoch in range(EPOCHS):
        for start in range(0, TRAIN_N, BATCH):
            idx = order[start:start + BATCH]
            opt.zero_grad()
            loss = F.cross_entropy(model(xs[idx]), ys[idx])
            loss.backward()
            opt.step()

    model.eval()
    with torch.inference_mode():
        pred = model(_to_batch(test_x)).argmax(dim=1).numpy()
    acc = float((pred == test_y).mean())

    out_path.parent.mkdir(parents=True, exist_ok=True)
    torch.save(model.state_dict(), out_path)
    return acc


def main() -> int:
    out = pathlib.Path(__file__).resolve().parent / "weights" / "tiny-cnn.pt"
    acc = train(out)
    print(f"saved {out} (held-out accuracy {acc:.3f})")
    return 0 if acc >= 0.9 else 1


if __name__ == "__main__":
    sys.exit(main())
