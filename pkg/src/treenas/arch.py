"""Lowering from tree genomes to sequential architecture descriptors.

The phenotype of a genome is an ordered chain of residual-block instances:
leaves left to right become blocks, a block's output width is
``base_filters`` times the sum of all widen operators on its root path, and
a block directly under ``str`` convolves with stride 2.  The descriptor is
pure data (no tensors); :func:`param_count` and :func:`conv_layer_count`
derive the usual size statistics from it.
"""

from __future__ import annotations

from collections import Counter
from dataclasses import dataclass, field
from typing import Mapping

from .genome import (
    GenomeError,
    GenomeTree,
    STRIDE,
    WIDEN_STEP,
)


class CompileError(ValueError):
    """Raised when a genome cannot be lowered to a descriptor."""


@dataclass(frozen=True)
class BlockSpec:
    """Convolution stack of one block type.

    Each kernel entry is one BN + ReLU + conv unit (pre-activation order);
    kernel sizes are restricted to 1x1 and 3x3.
    """

    conv_kernels: tuple[int, ...]

    def __post_init__(self) -> None:
        if not self.conv_kernels:
            raise ValueError("a block needs at least one convolution")
        if any(k not in (1, 3) for k in self.conv_kernels):
            raise ValueError(f"kernel sizes must be 1 or 3, got {self.conv_kernels}")


#: Default four-block table: two 3x3-heavy bodies and two bottleneck-style
#: bodies, all built from 3x3 and 1x1 convolutions.
DEFAULT_BLOCK_TABLE: Mapping[str, BlockSpec] = {
    "b1": BlockSpec((3, 3)),
    "b2": BlockSpec((3, 1, 3)),
    "b3": BlockSpec((1, 3, 1)),
    "b4": BlockSpec((3, 1)),
}


@dataclass(frozen=True)
class BlockLibrary:
    """The block types in force plus the base filter count."""

    base_filters: int = 16
    entries: Mapping[str, BlockSpec] = field(
        default_factory=lambda: dict(DEFAULT_BLOCK_TABLE)
    )

    def __post_init__(self) -> None:
        if self.base_filters < 1:
            raise ValueError("base_filters must be >= 1")
        if not self.entries:
            raise ValueError("block library cannot be empty")

    @property
    def block_ids(self) -> tuple[str, ...]:
        return tuple(self.entries)


@dataclass(frozen=True)
class BlockInstance:
    """One block in the compiled chain."""

    block_id: str
    filters: int
    stride: int
    in_channels: int


@dataclass(frozen=True)
class ArchDescriptor:
    """The phenotype: input shape, block chain and classifier head."""

    input_shape: tuple[int, int, int]  # (height, width, channels)
    base_filters: int
    blocks: tuple[BlockInstance, ...]
    num_classes: int
    global_avg_pool: bool = True
    shortcut: str = "projection"

    def __post_init__(self) -> None:
        if not self.blocks:
            raise ValueError("descriptor needs at least one block")
        if self.shortcut not in ("projection", "pad"):
            raise ValueError(f"unknown shortcut policy {self.shortcut!r}")
        height, width, _ = self.input_shape
        stride_product = 1
        for block in self.blocks:
            stride_product *= block.stride
        if stride_product > min(height, width):
            raise ValueError(
                f"stride product {stride_product} exceeds input size"
                f" {min(height, width)}"
            )

    def to_json_dict(self) -> dict:
        """JSON form with the wire field order."""
        height, width, channels = self.input_shape
        return {
            "input": {"h": height, "w": width, "c": channels},
            "base_filters": self.base_filters,
            "blocks": [
                {
                    "type": block.block_id,
                    "filters": block.filters,
                    "stride": block.stride,
                    "in_channels": block.in_channels,
                }
                for block in self.blocks
            ],
            "classifier": {"classes": self.num_classes, "gap": self.global_avg_pool},
            "shortcut": self.shortcut,
        }

    @classmethod
    def from_json_dict(cls, data: Mapping) -> "ArchDescriptor":
        return cls(
            input_shape=(data["input"]["h"], data["input"]["w"], data["input"]["c"]),
            base_filters=data["base_filters"],
            blocks=tuple(
                BlockInstance(
                    block_id=entry["type"],
                    filters=entry["filters"],
                    stride=entry["stride"],
                    in_channels=entry["in_channels"],
                )
                for entry in data["blocks"]
            ),
            num_classes=data["classifier"]["classes"],
            global_avg_pool=data["classifier"]["gap"],
            shortcut=data["shortcut"],
        )


def filter_multiplier(tree: GenomeTree, leaf: int) -> int:
    """Sum of widen steps on the leaf's root path; 1 when none apply."""
    node = tree.node_at(leaf)
    if not node.is_terminal:
        raise GenomeError(f"cursor {leaf} is not a terminal")
    total = 0
    for ancestor in tree.ancestors(leaf):
        total += WIDEN_STEP.get(tree.node_at(ancestor).symbol, 0)
    return total if total > 0 else 1


def stride_of(tree: GenomeTree, leaf: int) -> int:
    """2 when the leaf sits directly under a stride node, else 1."""
    node = tree.node_at(leaf)
    if not node.is_terminal:
        raise GenomeError(f"cursor {leaf} is not a terminal")
    parent = tree.parent_of(leaf)
    if parent is not None and tree.node_at(parent).symbol == STRIDE:
        return 2
    return 1


def compile_tree(
    tree: GenomeTree,
    library: BlockLibrary | None = None,
    input_shape: tuple[int, int, int] = (32, 32, 3),
    num_classes: int = 10,
    global_avg_pool: bool = True,
    shortcut: str = "projection",
) -> ArchDescriptor:
    """Lower a feasible genome to its architecture descriptor.

    Blocks appear in leaf order; the first block's input channels are the
    image channels and each later block consumes its predecessor's filters.
    """
    library = library or BlockLibrary()
    violations = tree.validate(library.block_ids)
    if violations:
        summary = "; ".join(v.message for v in violations)
        raise CompileError(f"infeasible genome: {summary}")
    height, width, channels = input_shape
    blocks: list[BlockInstance] = []
    in_channels = channels
    stride_product = 1
    for index, leaf in enumerate(tree.leaves_in_order()):
        block_id = tree.node_at(leaf).symbol
        filters = library.base_filters * filter_multiplier(tree, leaf)
        stride = stride_of(tree, leaf)
        stride_product *= stride
        if stride_product > min(height, width):
            raise CompileError(
                f"stride product {stride_product} exceeds input size"
                f" {min(height, width)} at block {index}"
            )
        blocks.append(BlockInstance(block_id, filters, stride, in_channels))
        in_channels = filters
    return ArchDescriptor(
        input_shape=input_shape,
        base_filters=library.base_filters,
        blocks=tuple(blocks),
        num_classes=num_classes,
        global_avg_pool=global_avg_pool,
        shortcut=shortcut,
    )


def needs_projection(block: BlockInstance) -> bool:
    """True when the residual shortcut needs a shape adapter."""
    return block.in_channels != block.filters or block.stride != 1


def block_param_count(block: BlockInstance, library: BlockLibrary) -> int:
    """Learnable parameters of one block body (convs plus their BNs)."""
    spec = library.entries[block.block_id]
    total = 0
    channels = block.in_channels
    for kernel in spec.conv_kernels:
        total += 2 * channels  # BN scale + shift on the conv input
        total += kernel * kernel * channels * block.filters
        channels = block.filters
    return total


def param_count(descriptor: ArchDescriptor, library: BlockLibrary) -> int:
    """Total learnable parameters of the described network.

    Convolutions carry no bias; a 1x1 projection is counted on every
    shortcut whose shape changes (under the ``projection`` policy); the
    classifier is a bias-carrying linear layer on the pooled features.
    """
    total = 0
    for block in descriptor.blocks:
        total += block_param_count(block, library)
        if descriptor.shortcut == "projection" and needs_projection(block):
            total += block.in_channels * block.filters
    last_filters = descriptor.blocks[-1].filters
    total += last_filters * descriptor.num_classes + descriptor.num_classes
    return total


def conv_layer_count(descriptor: ArchDescriptor, library: BlockLibrary) -> int:
    """Number of block-body convolutions (projection shortcuts excluded)."""
    return sum(
        len(library.entries[block.block_id].conv_kernels)
        for block in descriptor.blocks
    )


def block_ratios(tree: GenomeTree) -> dict[str, float]:
    """Share of each block type among the tree's terminals; sums to 1."""
    leaves = tree.leaves_in_order()
    counts = Counter(tree.node_at(c).symbol for c in leaves)
    total = len(leaves)
    return {block_id: counts[block_id] / total for block_id in sorted(counts)}


def block_composition(tree: GenomeTree) -> dict[str, int]:
    """Terminal count per block type."""
    leaves = tree.leaves_in_order()
    counts = Counter(tree.node_at(c).symbol for c in leaves)
    return {block_id: counts[block_id] for block_id in sorted(counts)}


__all__ = [
    "ArchDescriptor",
    "BlockInstance",
    "BlockLibrary",
    "BlockSpec",
    "CompileError",
    "DEFAULT_BLOCK_TABLE",
    "block_composition",
    "block_param_count",
    "block_ratios",
    "compile_tree",
    "conv_layer_count",
    "filter_multiplier",
    "needs_projection",
    "param_count",
    "stride_of",
]
