"""Toy 10-class 32x32 RGB image set with standard augmentation.

The default dataset is synthetic and fully deterministic: each class owns a
fixed low-frequency color pattern; samples are the pattern under brightness
jitter plus Gaussian noise, standardized per sample.  A real CIFAR-10-style
archive (python pickle batches) can be substituted with ``data_path`` when
one is available; the build environment for this package has no network
access, so downloads are out.

Training-time augmentation follows the usual recipe: random horizontal
flips and random 32x32 crops from images zero-padded by 2 pixels per side.
"""

from __future__ import annotations

import pickle
import tarfile
from pathlib import Path

import numpy as np
import torch
from torch.nn import functional as F


def _standardize(images: np.ndarray) -> np.ndarray:
    mean = images.mean(axis=(1, 2, 3), keepdims=True)
    std = images.std(axis=(1, 2, 3), keepdims=True)
    return (images - mean) / np.maximum(std, 1e-6)


def synthetic_dataset(
    count: int,
    seed: int,
    classes: int = 10,
    size: int = 32,
) -> tuple[np.ndarray, np.ndarray]:
    """Deterministic class-patterned images, standardized per sample."""
    rng = np.random.default_rng(seed)
    upsample = size // 8
    prototypes = rng.normal(size=(classes, 3, 8, 8)).astype(np.float32)
    prototypes = prototypes.repeat(upsample, axis=2).repeat(upsample, axis=3)
    labels = rng.integers(0, classes, size=count).astype(np.int64)
    brightness = rng.uniform(0.7, 1.3, size=(count, 1, 1, 1)).astype(np.float32)
    noise = rng.normal(scale=0.6, size=(count, 3, size, size)).astype(np.float32)
    images = prototypes[labels] * brightness + noise
    return _standardize(images), labels


def load_cifar_archive(
    path: str | Path, count: int, classes: int = 10
) -> tuple[np.ndarray, np.ndarray]:
    """Read the first ``count`` training samples from a CIFAR-10 python archive.

    Accepts either the extracted ``cifar-10-batches-py`` directory or the
    ``.tar.gz`` archive.
    """
    path = Path(path)
    images: list[np.ndarray] = []
    labels: list[int] = []

    def consume(payload: dict) -> None:
        data = payload[b"data"].reshape(-1, 3, 32, 32).astype(np.float32) / 255.0
        images.append(data)
        labels.extend(payload[b"labels"])

    if path.is_dir():
        for index in range(1, 6):
            batch = path / f"data_batch_{index}"
            if batch.exists():
                with batch.open("rb") as handle:
                    consume(pickle.load(handle, encoding="bytes"))
            if sum(len(chunk) for chunk in images) >= count:
                break
    else:
        with tarfile.open(path, "r:*") as archive:
            for member in archive.getmembers():
                if "data_batch" in member.name:
                    handle = archive.extractfile(member)
                    assert handle is not None
                    consume(pickle.load(handle, encoding="bytes"))
                if sum(len(chunk) for chunk in images) >= count:
                    break
    stacked = np.concatenate(images)[:count]
    label_array = np.asarray(labels[:count], dtype=np.int64)
    if label_array.max() >= classes:
        raise ValueError(f"archive labels exceed {classes} classes")
    return _standardize(stacked), label_array


def make_splits(
    train_size: int,
    val_size: int,
    data_seed: int,
    classes: int = 10,
    size: int = 32,
    data_path: str | Path | None = None,
) -> tuple[torch.Tensor, torch.Tensor, torch.Tensor, torch.Tensor]:
    """Train/validation tensors, generated or loaded deterministically."""
    total = train_size + val_size
    if data_path is not None:
        images, labels = load_cifar_archive(data_path, total, classes)
    else:
        images, labels = synthetic_dataset(total, data_seed, classes, size)
    x = torch.from_numpy(np.ascontiguousarray(images))
    y = torch.from_numpy(labels)
    return x[:train_size], y[:train_size], x[train_size:total], y[train_size:total]


def augment_batch(batch: torch.Tensor, generator: torch.Generator) -> torch.Tensor:
    """Random horizontal flips plus random crops from 2-pixel zero padding."""
    flips = torch.rand(batch.shape[0], generator=generator) < 0.5
    batch = batch.clone()
    batch[flips] = batch[flips].flip(-1)
    padded = F.pad(batch, (2, 2, 2, 2))
    size = batch.shape[-1]
    offsets = torch.randint(0, 5, (batch.shape[0], 2), generator=generator)
    out = torch.empty_like(batch)
    for index in range(batch.shape[0]):
        dy, dx = int(offsets[index, 0]), int(offsets[index, 1])
        out[index] = padded[index, :, dy : dy + size, dx : dx + size]
    return out
