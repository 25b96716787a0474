"""Architecture-descriptor wire format.

The search engine hands over one JSON document per candidate:

    {"input": {"h": 32, "w": 32, "c": 3},
     "base_filters": 16,
     "blocks": [{"type": "b2", "filters": 80, "stride": 1, "in_channels": 3}, ...],
     "classifier": {"classes": 10, "gap": true},
     "shortcut": "projection"}

This module parses and sanity-checks that document.  It deliberately does
not import the engine package: the JSON schema is the only contract.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping


class DescriptorError(ValueError):
    """The request's descriptor is malformed or internally inconsistent."""


#: Convolution stack per block type, mirroring the engine's default table.
DEFAULT_BLOCK_KERNELS: Mapping[str, tuple[int, ...]] = {
    "b1": (3, 3),
    "b2": (3, 1, 3),
    "b3": (1, 3, 1),
    "b4": (3, 1),
}


@dataclass(frozen=True)
class BlockEntry:
    block_type: str
    filters: int
    stride: int
    in_channels: int


@dataclass(frozen=True)
class Descriptor:
    height: int
    width: int
    channels: int
    base_filters: int
    blocks: tuple[BlockEntry, ...]
    classes: int
    global_avg_pool: bool
    shortcut: str


def _require(condition: bool, message: str) -> None:
    if not condition:
        raise DescriptorError(message)


def parse_descriptor(
    payload: Mapping,
    block_kernels: Mapping[str, tuple[int, ...]] | None = None,
) -> Descriptor:
    """Validate a descriptor document and return its typed form.

    Checks the field structure, that every block type is known, that the
    input-channel chain is consistent, and that the stride chain keeps the
    spatial size at 1 or more.
    """
    kernels = block_kernels or DEFAULT_BLOCK_KERNELS
    try:
        height = int(payload["input"]["h"])
        width = int(payload["input"]["w"])
        channels = int(payload["input"]["c"])
        base_filters = int(payload["base_filters"])
        raw_blocks = payload["blocks"]
        classes = int(payload["classifier"]["classes"])
        gap = bool(payload["classifier"]["gap"])
        shortcut = str(payload["shortcut"])
    except (KeyError, TypeError, ValueError) as exc:
        raise DescriptorError(f"descriptor structure invalid: {exc!r}") from exc

    _require(height >= 1 and width >= 1 and channels >= 1, "input shape must be positive")
    _require(base_filters >= 1, "base_filters must be >= 1")
    _require(isinstance(raw_blocks, list) and raw_blocks, "blocks must be a non-empty list")
    _require(classes >= 2, "classifier needs at least 2 classes")
    _require(shortcut in ("projection", "pad"), f"unknown shortcut policy {shortcut!r}")

    blocks: list[BlockEntry] = []
    expected_in = channels
    spatial = min(height, width)
    for index, raw in enumerate(raw_blocks):
        try:
            entry = BlockEntry(
                block_type=str(raw["type"]),
                filters=int(raw["filters"]),
                stride=int(raw["stride"]),
                in_channels=int(raw["in_channels"]),
            )
        except (KeyError, TypeError, ValueError) as exc:
            raise DescriptorError(f"block {index} invalid: {exc!r}") from exc
        _require(entry.block_type in kernels, f"block {index}: unknown type {entry.block_type!r}")
        _require(entry.filters >= 1, f"block {index}: filters must be >= 1")
        _require(entry.stride in (1, 2), f"block {index}: stride must be 1 or 2")
        _require(
            entry.in_channels == expected_in,
            f"block {index}: in_channels {entry.in_channels} breaks the chain"
            f" (expected {expected_in})",
        )
        spatial = spatial // entry.stride
        _require(spatial >= 1, f"block {index}: stride chain collapses the spatial size")
        expected_in = entry.filters
        blocks.append(entry)

    return Descriptor(
        height=height,
        width=width,
        channels=channels,
        base_filters=base_filters,
        blocks=tuple(blocks),
        classes=classes,
        global_avg_pool=gap,
        shortcut=shortcut,
    )
