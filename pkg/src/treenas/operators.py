"""Genetic operators: tree construction, selection, crossover, mutation.

Every operator is a pure function of its inputs and its random stream.
Streams are derived from (master seed, generation, role, index), so a whole
run replays bit-identically from one seed and independent operator
applications stay independent of scheduling order.
"""

from __future__ import annotations

import hashlib
import math
import random
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .genome import (
    ARITY,
    DEFAULT_BLOCK_IDS,
    GenomeTree,
    Individual,
    Node,
    PLUS,
    STRIDE,
    STRIDE_BUDGET,
    WIDEN2,
    WIDEN3,
)


class RngStream(random.Random):
    """Deterministic random stream addressed by (seed, generation, role, index)."""

    @classmethod
    def derive(
        cls, master_seed: int, generation: int, role: str, index: int = 0
    ) -> "RngStream":
        material = f"{master_seed}/{generation}/{role}/{index}".encode()
        return cls(int.from_bytes(hashlib.sha256(material).digest(), "big"))


@dataclass(frozen=True)
class ScheduleParams:
    """Per-generation knobs shared by the scheduled operators."""

    population_size: int
    max_generations: int
    generation: int
    mutation_rate: float
    max_depth: int
    mutation_subtree_depth: int = 4

    def __post_init__(self) -> None:
        if self.population_size < 4 or self.population_size % 2:
            raise ValueError("population size must be even and >= 4")
        if not 1 <= self.generation <= self.max_generations:
            raise ValueError("generation must lie in [1, max_generations]")
        if not 0.0 <= self.mutation_rate <= 1.0:
            raise ValueError("mutation rate must lie in [0, 1]")
        if self.max_depth < 2:
            raise ValueError("max_depth must be >= 2")
        if self.mutation_subtree_depth < 1:
            raise ValueError("mutation_subtree_depth must be >= 1")


# -- tree construction -------------------------------------------------------


def grow(
    rng: random.Random,
    max_depth: int,
    root_must_be_plus: bool = True,
    stride_budget: int = STRIDE_BUDGET,
    block_ids: Sequence[str] = DEFAULT_BLOCK_IDS,
) -> GenomeTree:
    """Build a random tree, mixing functions and terminals at every depth.

    Each position draws uniformly from the symbols legal there: terminals
    are forced at ``max_depth`` and under a stride node, and stride itself
    is only offered while the budget lasts.  With ``root_must_be_plus``
    disabled the result is a fragment whose root may be any symbol.
    """
    if root_must_be_plus and max_depth < 2:
        raise ValueError("a tree rooted at '+' needs max_depth >= 2")
    if max_depth < 1:
        raise ValueError("max_depth must be >= 1")
    budget = [stride_budget]

    def build(depth: int) -> Node:
        if depth >= max_depth:
            return Node(rng.choice(block_ids))
        choices = list(block_ids) + [PLUS, WIDEN2, WIDEN3]
        if budget[0] > 0:
            choices.append(STRIDE)
        symbol = rng.choice(choices)
        if symbol not in ARITY:
            return Node(symbol)
        if symbol == STRIDE:
            budget[0] -= 1
            return Node(STRIDE, (Node(rng.choice(block_ids)),))
        return Node(symbol, tuple(build(depth + 1) for _ in range(ARITY[symbol])))

    if root_must_be_plus:
        root = Node(PLUS, (build(2), build(2)))
    else:
        root = build(1)
    return GenomeTree(root)


def full(
    rng: random.Random,
    max_depth: int,
    stride_budget: int = STRIDE_BUDGET,
    block_ids: Sequence[str] = DEFAULT_BLOCK_IDS,
) -> GenomeTree:
    """Build a random tree whose every leaf sits at exactly ``max_depth``.

    Internal positions draw from the function set only; stride is offered
    solely at depth ``max_depth - 1`` (its child must be a terminal, and a
    shallower stride would cut the leaf short of the target depth).
    """
    if max_depth < 2:
        raise ValueError("max_depth must be >= 2")
    budget = [stride_budget]

    def build(depth: int) -> Node:
        if depth == max_depth:
            return Node(rng.choice(block_ids))
        choices = [PLUS, WIDEN2, WIDEN3]
        if depth == max_depth - 1 and budget[0] > 0:
            choices.append(STRIDE)
        symbol = rng.choice(choices)
        if symbol == STRIDE:
            budget[0] -= 1
        return Node(symbol, tuple(build(depth + 1) for _ in range(ARITY[symbol])))

    root = Node(PLUS, (build(2), build(2)))
    return GenomeTree(root)


def ramped_half_and_half(
    rng: random.Random,
    population_size: int,
    max_depth: int,
    stride_budget: int = STRIDE_BUDGET,
    block_ids: Sequence[str] = DEFAULT_BLOCK_IDS,
) -> list[GenomeTree]:
    """Initial population split across depth caps 2..max_depth.

    Each part is half grow and half full trees.  When the population does
    not divide evenly, the leftover individuals go one apiece to the
    shallowest parts, and an odd part size gives its extra tree to grow.
    """
    if population_size < 2:
        raise ValueError("population_size must be >= 2")
    if max_depth < 2:
        raise ValueError("max_depth must be >= 2")
    depth_caps = list(range(2, max_depth + 1))
    base, leftover = divmod(population_size, len(depth_caps))
    trees: list[GenomeTree] = []
    for part, depth_cap in enumerate(depth_caps):
        count = base + (1 if part < leftover else 0)
        full_count = count // 2
        grow_count = count - full_count
        for _ in range(grow_count):
            trees.append(grow(rng, depth_cap, True, stride_budget, block_ids))
        for _ in range(full_count):
            trees.append(full(rng, depth_cap, stride_budget, block_ids))
    return trees


# -- selection ----------------------------------------------------------------


def tournament_size(generation: int, max_generations: int, population_size: int) -> int:
    """Tournament size schedule: 2 at the first generation, N/2 at the last.

    Grows with the log of the generation index, shifting selection pressure
    from near-random sampling toward the population's best.
    """
    if not 1 <= generation <= max_generations:
        raise ValueError("generation must lie in [1, max_generations]")
    if population_size < 4:
        raise ValueError("population_size must be >= 4")
    if generation == 1 or max_generations == 1:
        return 2
    ratio = math.log2(generation) / math.log2(max_generations)
    return math.ceil(2.0 + (population_size / 2.0 - 2.0) * ratio)


def tournament_select(
    population: Sequence[Individual], size: int, rng: random.Random
) -> Individual:
    """Draw ``size`` individuals without replacement and keep the fittest.

    Ties go to the smaller tree, then to the lower population index.
    """
    if not 1 <= size <= len(population):
        raise ValueError(f"tournament size {size} out of range 1..{len(population)}")
    for individual in population:
        if individual.fitness is None:
            raise ValueError("tournament requires every individual to be evaluated")
    entrants = rng.sample(range(len(population)), size)
    winner = min(
        entrants,
        key=lambda i: (-population[i].fitness, population[i].genome.node_count(), i),
    )
    return population[winner]


# -- crossover ----------------------------------------------------------------


def crossover_score(value: float, generation: int, max_generations: int) -> float:
    """Roulette weight of one candidate point pair.

    ``value`` is the pair's normalized subtree-size difference.  Early in
    the run large differences score high (pushing complexity around);
    after the midpoint small differences win (preserving structure while
    exploring); at the exact midpoint every pair scores 1.
    """
    return 1.0 + value * (max_generations - 2 * generation) / max_generations


def normalize_diffs(diffs: np.ndarray, strategy: str = "max") -> np.ndarray:
    """Map a nonnegative difference matrix into [0, 1].

    ``max`` divides by the largest entry, ``minmax`` stretches the observed
    range, ``sum`` divides by the total.  A flat matrix normalizes to all
    zeros under every strategy.
    """
    diffs = np.asarray(diffs, dtype=float)
    if strategy == "max":
        top = diffs.max() if diffs.size else 0.0
        return diffs / top if top > 0 else np.zeros_like(diffs)
    if strategy == "minmax":
        low = diffs.min() if diffs.size else 0.0
        high = diffs.max() if diffs.size else 0.0
        if high > low:
            return (diffs - low) / (high - low)
        return np.zeros_like(diffs)
    if strategy == "sum":
        total = diffs.sum()
        return diffs / total if total > 0 else np.zeros_like(diffs)
    raise ValueError(f"unknown normalization strategy {strategy!r}")


def pair_scores(
    tree_k: GenomeTree,
    tree_m: GenomeTree,
    generation: int,
    max_generations: int,
    normalization: str = "max",
) -> np.ndarray:
    """Score matrix over all non-root crossover point pairs (rows: tree_k)."""
    sizes_k = np.asarray(tree_k.subtree_sizes()[1:], dtype=float)
    sizes_m = np.asarray(tree_m.subtree_sizes()[1:], dtype=float)
    diffs = np.abs(sizes_k[:, None] - sizes_m[None, :])
    values = normalize_diffs(diffs, normalization)
    return 1.0 + values * (max_generations - 2 * generation) / max_generations


@dataclass(frozen=True)
class CrossoverPointPair:
    """One chosen swap point per parent, with its roulette score.

    Cursors address the respective parent trees and are never the roots.
    """

    cursor_k: int
    cursor_m: int
    score: float


def select_crossover_points(
    tree_k: GenomeTree,
    tree_m: GenomeTree,
    generation: int,
    max_generations: int,
    rng: random.Random,
    normalization: str = "max",
) -> CrossoverPointPair:
    """Draw a swap-point pair by roulette wheel over :func:`pair_scores`.

    The roots are never candidates (a root swap would just clone the
    parents); when every score is zero the draw falls back to uniform.
    """
    scores = pair_scores(tree_k, tree_m, generation, max_generations, normalization)
    flat = scores.ravel()
    total = float(flat.sum())
    if total <= 0.0:
        pick = rng.randrange(flat.size)
    else:
        threshold = rng.random() * total
        pick = int(np.searchsorted(np.cumsum(flat), threshold, side="right"))
        pick = min(pick, flat.size - 1)
    columns = tree_m.node_count() - 1
    return CrossoverPointPair(
        cursor_k=1 + pick // columns,
        cursor_m=1 + pick % columns,
        score=float(flat[pick]),
    )


def crossover(
    parent_k: Individual,
    parent_m: Individual,
    generation: int,
    max_generations: int,
    rng: random.Random,
    normalization: str = "max",
) -> tuple[Individual, Individual]:
    """Swap one subtree pair between the parents and repair both children."""
    tree_k, tree_m = parent_k.genome, parent_m.genome
    points = select_crossover_points(
        tree_k, tree_m, generation, max_generations, rng, normalization
    )
    cursor_k, cursor_m = points.cursor_k, points.cursor_m
    fragment_k = tree_k.node_at(cursor_k)
    fragment_m = tree_m.node_at(cursor_m)
    child_k = repair(tree_k.replace_subtree(cursor_k, fragment_m))
    child_m = repair(tree_m.replace_subtree(cursor_m, fragment_k))
    return (
        Individual(child_k, birth_generation=generation),
        Individual(child_m, birth_generation=generation),
    )


# -- repair ---------------------------------------------------------------------


def _splice_infeasible_strides(root: Node) -> Node:
    """Drop every stride node whose child is not a terminal (bottom-up)."""
    order: list[Node] = []
    stack = [root]
    while stack:
        node = stack.pop()
        order.append(node)
        stack.extend(node.children)
    rebuilt: dict[int, Node] = {}
    for node in reversed(order):
        kids = tuple(rebuilt[id(child)] for child in node.children)
        if node.symbol == STRIDE and kids and not kids[0].is_terminal:
            rebuilt[id(node)] = kids[0]
        elif all(k is c for k, c in zip(kids, node.children)):
            rebuilt[id(node)] = node
        else:
            rebuilt[id(node)] = Node(node.symbol, kids)
    return rebuilt[id(root)]


def repair(tree: GenomeTree) -> GenomeTree:
    """Restore stride feasibility after an unchecked edit.

    Stride nodes over non-terminals are spliced out (the child takes their
    place); then, while more than five strides remain, the deepest one goes
    (rightmost on depth ties).  Feasible trees come back unchanged.
    """
    root = _splice_infeasible_strides(tree.root)
    repaired = tree if root is tree.root else GenomeTree(root)
    while repaired.stride_count() > STRIDE_BUDGET:
        victim = max(
            (c for c in repaired.cursors() if repaired.node_at(c).symbol == STRIDE),
            key=lambda c: (repaired.depth_of(c), c),
        )
        child = repaired.node_at(victim).children[0]
        repaired = repaired.replace_subtree(victim, child)
    return repaired


# -- mutation ---------------------------------------------------------------------


def mutate(
    individual: Individual,
    params: ScheduleParams,
    rng: random.Random,
    block_ids: Sequence[str] = DEFAULT_BLOCK_IDS,
    stride_budget: int = STRIDE_BUDGET,
) -> Individual:
    """Replace one uniformly chosen terminal with a freshly grown subtree.

    The fragment honors the remaining stride budget, and a terminal sitting
    under a stride node can only be swapped for another single terminal.
    The child's fitness is cleared.
    """
    tree = individual.genome
    leaf = rng.choice(tree.leaves_in_order())
    parent = tree.parent_of(leaf)
    if parent is not None and tree.node_at(parent).symbol == STRIDE:
        fragment: Node = Node(rng.choice(block_ids))
    else:
        remaining = stride_budget - tree.stride_count()
        fragment = grow(
            rng,
            params.mutation_subtree_depth,
            root_must_be_plus=False,
            stride_budget=remaining,
            block_ids=block_ids,
        ).root
    return Individual(
        tree.replace_subtree(leaf, fragment),
        birth_generation=params.generation,
    )


# -- survivor selection ------------------------------------------------------------


def elitism_update(
    parents: Sequence[Individual], children: Sequence[Individual]
) -> list[Individual]:
    """Keep the best ``len(parents)`` individuals of the combined pool.

    Ties prefer smaller trees, then parents over children, then the lower
    index.  The result is sorted by descending fitness.
    """
    pool: list[tuple[Individual, int, int]] = [
        (individual, origin, index)
        for origin, group in enumerate((parents, children))
        for index, individual in enumerate(group)
    ]
    for individual, _, _ in pool:
        if individual.fitness is None:
            raise ValueError("elitism requires every individual to be evaluated")
    pool.sort(
        key=lambda entry: (
            -entry[0].fitness,
            entry[0].genome.node_count(),
            entry[1],
            entry[2],
        )
    )
    return [entry[0] for entry in pool[: len(parents)]]


__all__ = [
    "CrossoverPointPair",
    "RngStream",
    "ScheduleParams",
    "crossover",
    "crossover_score",
    "elitism_update",
    "full",
    "grow",
    "mutate",
    "normalize_diffs",
    "pair_scores",
    "ramped_half_and_half",
    "repair",
    "select_crossover_points",
    "tournament_size",
    "tournament_select",
]
