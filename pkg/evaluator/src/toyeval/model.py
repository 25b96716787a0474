"""Torch model construction from a parsed descriptor.

Each block is a pre-activation residual unit: one BN -> ReLU -> conv stage
per kernel entry, the first conv carrying the block's stride and channel
change.  Nothing is added on the shortcut when shapes match; otherwise a
1x1 projection (or, under the ``pad`` policy, spatial subsampling with
channel slicing/zero-padding) adapts it.
"""

from __future__ import annotations

from typing import Mapping

import torch
from torch import nn
from torch.nn import functional as F

from .descriptor import DEFAULT_BLOCK_KERNELS, Descriptor


class PadShortcut(nn.Module):
    """Parameter-free shortcut: subsample spatially, zero-pad channels."""

    def __init__(self, in_channels: int, out_channels: int, stride: int) -> None:
        super().__init__()
        self.stride = stride
        self.in_channels = in_channels
        self.out_channels = out_channels

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        if self.stride != 1:
            x = x[:, :, :: self.stride, :: self.stride]
        if self.out_channels < self.in_channels:
            return x[:, : self.out_channels]
        if self.out_channels > self.in_channels:
            return F.pad(x, (0, 0, 0, 0, 0, self.out_channels - self.in_channels))
        return x


class ResidualBlock(nn.Module):
    def __init__(
        self,
        in_channels: int,
        out_channels: int,
        kernels: tuple[int, ...],
        stride: int,
        shortcut_policy: str,
    ) -> None:
        super().__init__()
        stages: list[nn.Module] = []
        channels = in_channels
        for index, kernel in enumerate(kernels):
            stages.append(nn.BatchNorm2d(channels))
            stages.append(nn.ReLU(inplace=True))
            stages.append(
                nn.Conv2d(
                    channels,
                    out_channels,
                    kernel,
                    stride=stride if index == 0 else 1,
                    padding=kernel // 2,
                    bias=False,
                )
            )
            channels = out_channels
        self.body = nn.Sequential(*stages)
        if in_channels == out_channels and stride == 1:
            self.shortcut: nn.Module = nn.Identity()
        elif shortcut_policy == "projection":
            self.shortcut = nn.Conv2d(
                in_channels, out_channels, 1, stride=stride, bias=False
            )
        else:
            self.shortcut = PadShortcut(in_channels, out_channels, stride)

    def forward(self, x: torch.Tensor) -> torch.Tensor:
        return self.body(x) + self.shortcut(x)


def scaled_filters(filters: int, scale: float) -> int:
    return max(1, round(filters * scale))


def build_model(
    descriptor: Descriptor,
    filter_scale: float = 1.0,
    block_kernels: Mapping[str, tuple[int, ...]] | None = None,
) -> nn.Module:
    """Materialize the block chain plus BN/ReLU head, pooling and classifier.

    ``filter_scale`` shrinks every block's width (never below one channel)
    so descriptors sized for full training stay trainable on a CPU budget.
    """
    kernels = block_kernels or DEFAULT_BLOCK_KERNELS
    layers: list[nn.Module] = []
    channels = descriptor.channels
    spatial = (descriptor.height, descriptor.width)
    for entry in descriptor.blocks:
        width = scaled_filters(entry.filters, filter_scale)
        layers.append(
            ResidualBlock(
                channels,
                width,
                kernels[entry.block_type],
                entry.stride,
                descriptor.shortcut,
            )
        )
        channels = width
        spatial = (spatial[0] // entry.stride, spatial[1] // entry.stride)
    layers.append(nn.BatchNorm2d(channels))
    layers.append(nn.ReLU(inplace=True))
    if descriptor.global_avg_pool:
        layers.append(nn.AdaptiveAvgPool2d(1))
        layers.append(nn.Flatten())
        features = channels
    else:
        layers.append(nn.Flatten())
        features = channels * spatial[0] * spatial[1]
    layers.append(nn.Linear(features, descriptor.classes))
    return nn.Sequential(*layers)


def conv_count(model: nn.Module) -> int:
    """Trainable convolutions in the model (body convs plus projections)."""
    return sum(1 for module in model.modules() if isinstance(module, nn.Conv2d))
