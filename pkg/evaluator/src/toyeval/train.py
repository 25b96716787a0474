"""Short CNN training runs that turn descriptors into fitness values.

Hyper-parameters default to the reference recipe, compressed to desk scale:
SGD with Nesterov momentum 0.9, batch size 128, initial learning rate 0.1
decayed by 5x at 30% / 60% / 80% of the run (the 60/120/160-of-200-epoch
schedule mapped onto the shorter budget), weight decay 5e-4.  The explicit
deviations from the full recipe are the epoch count (4 instead of 200) and
the 0.25x filter scale; both exist purely to fit a CPU budget.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import torch
from torch.nn import functional as F

from .data import augment_batch, make_splits
from .descriptor import Descriptor, DescriptorError
from .model import build_model

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ToyTrainConfig:
    train_size: int = 4000
    val_size: int = 1000
    num_classes: int = 10
    image_size: int = 32
    epochs: int = 4
    batch_size: int = 128
    base_lr: float = 0.1
    lr_decay_factor: float = 0.2
    lr_milestones: tuple[float, ...] = (0.3, 0.6, 0.8)  # fractions of total steps
    momentum: float = 0.9  # Nesterov
    weight_decay: float = 5e-4
    filter_scale: float = 0.25
    seed: int = 0
    data_seed: int = 1234
    data_path: str | None = None
    augment: bool = True

    def __post_init__(self) -> None:
        if self.train_size < self.batch_size:
            raise ValueError("train_size must cover at least one batch")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if not 0 < self.filter_scale <= 1:
            raise ValueError("filter_scale must lie in (0, 1]")


_split_cache: dict[tuple, tuple] = {}


def _cached_splits(config: ToyTrainConfig):
    key = (
        config.train_size,
        config.val_size,
        config.data_seed,
        config.num_classes,
        config.image_size,
        config.data_path,
    )
    if key not in _split_cache:
        _split_cache[key] = make_splits(
            config.train_size,
            config.val_size,
            config.data_seed,
            config.num_classes,
            config.image_size,
            config.data_path,
        )
    return _split_cache[key]


def _learning_rate(config: ToyTrainConfig, step: int, total_steps: int) -> float:
    rate = config.base_lr
    for milestone in config.lr_milestones:
        if step >= milestone * total_steps:
            rate *= config.lr_decay_factor
    return rate


def train_and_score(descriptor: Descriptor, config: ToyTrainConfig) -> float:
    """Train the described network briefly; return validation accuracy."""
    if descriptor.classes != config.num_classes:
        raise DescriptorError(
            f"descriptor wants {descriptor.classes} classes; the toy set has"
            f" {config.num_classes}"
        )
    if (descriptor.height, descriptor.width) != (config.image_size, config.image_size):
        raise DescriptorError(
            f"descriptor input {descriptor.height}x{descriptor.width} does not"
            f" match the {config.image_size}x{config.image_size} toy set"
        )
    x_train, y_train, x_val, y_val = _cached_splits(config)

    torch.manual_seed(config.seed)
    model = build_model(descriptor, config.filter_scale)
    optimizer = torch.optim.SGD(
        model.parameters(),
        lr=config.base_lr,
        momentum=config.momentum,
        nesterov=True,
        weight_decay=config.weight_decay,
    )
    generator = torch.Generator().manual_seed(config.seed)
    steps_per_epoch = len(x_train) // config.batch_size
    total_steps = config.epochs * steps_per_epoch

    model.train()
    step = 0
    for _ in range(config.epochs):
        order = torch.randperm(len(x_train), generator=generator)
        for start in range(0, steps_per_epoch * config.batch_size, config.batch_size):
            index = order[start : start + config.batch_size]
            batch = x_train[index]
            if config.augment:
                batch = augment_batch(batch, generator)
            rate = _learning_rate(config, step, total_steps)
            for group in optimizer.param_groups:
                group["lr"] = rate
            optimizer.zero_grad()
            loss = F.cross_entropy(model(batch), y_train[index])
            loss.backward()
            optimizer.step()
            step += 1

    model.eval()
    correct = 0
    with torch.no_grad():
        for start in range(0, len(x_val), config.batch_size):
            batch = x_val[start : start + config.batch_size]
            predictions = model(batch).argmax(dim=1)
            correct += int((predictions == y_val[start : start + config.batch_size]).sum())
    accuracy = correct / len(x_val)
    logger.info("trained %d steps, validation accuracy %.4f", step, accuracy)
    return accuracy
