"""Shared test utilities: independent oracles and tree generators."""

from __future__ import annotations

from treenas import BlockLibrary, GenomeTree
from treenas.arch import ArchDescriptor
from treenas.operators import RngStream, grow


def oracle_param_count(descriptor: ArchDescriptor, library: BlockLibrary) -> int:
    """Independent parameter count by enumerating every weight tensor shape.

    Walks the descriptor conv by conv, materializing the shape of each
    parameter tensor (BN scale, BN shift, conv kernel, projection kernel,
    classifier weight and bias) and summing their element counts.  Kept
    deliberately separate from the production formula.
    """
    shapes: list[tuple[int, ...]] = []
    for block in descriptor.blocks:
        spec = library.entries[block.block_id]
        channels = block.in_channels
        for kernel in spec.conv_kernels:
            shapes.append((channels,))  # BN scale
            shapes.append((channels,))  # BN shift
            shapes.append((kernel, kernel, channels, block.filters))
            channels = block.filters
        shape_mismatch = block.in_channels != block.filters or block.stride != 1
        if descriptor.shortcut == "projection" and shape_mismatch:
            shapes.append((1, 1, block.in_channels, block.filters))
    shapes.append((descriptor.blocks[-1].filters, descriptor.num_classes))
    shapes.append((descriptor.num_classes,))
    total = 0
    for shape in shapes:
        count = 1
        for dim in shape:
            count *= dim
        total += count
    return total


def random_tree(seed: int, max_depth: int = 6) -> GenomeTree:
    """A valid random genome for a given seed."""
    return grow(RngStream.derive(seed, 0, "test-tree"), max_depth)
