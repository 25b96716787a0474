"""Tree genomes for block-based CNN architecture search.

The genotype is a rooted ordered tree.  Leaves name residual block types
(``b1``..``b4`` by default) and internal nodes describe how the blocks are
assembled:

* ``+`` joins two sub-networks in sequence (binary),
* ``^2`` / ``^3`` widen every block below them, adding 2 / 3 to the block's
  filter multiplier (unary),
* ``str`` doubles the stride of the single block below it (unary; its child
  must be a terminal).

Feasibility rules enforced by :meth:`GenomeTree.validate`: the root is
``+``, a tree carries at most five ``str`` nodes, and every ``str`` child is
a terminal.  Everything in this module is an immutable value; structural
edits return fresh trees, so genomes can be shared freely across threads.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Iterator, Mapping, Sequence

PLUS = "+"
WIDEN2 = "^2"
WIDEN3 = "^3"
STRIDE = "str"

#: Child count of each function symbol; terminals have no entry.
ARITY: Mapping[str, int] = {PLUS: 2, WIDEN2: 1, WIDEN3: 1, STRIDE: 1}
FUNCTION_SYMBOLS = (PLUS, WIDEN2, WIDEN3, STRIDE)

#: Additive filter-multiplier contribution of each widening symbol.
WIDEN_STEP: Mapping[str, int] = {WIDEN2: 2, WIDEN3: 3}

DEFAULT_BLOCK_IDS = ("b1", "b2", "b3", "b4")

#: Hard cap on ``str`` nodes per tree.
STRIDE_BUDGET = 5


class GenomeError(ValueError):
    """Raised for invalid cursors or illegal structural edits."""


@dataclass(frozen=True)
class Node:
    """A single tree node: a function symbol or a terminal block id."""

    symbol: str
    children: tuple["Node", ...] = ()

    @property
    def is_terminal(self) -> bool:
        return self.symbol not in ARITY

    def __str__(self) -> str:
        # Iterative rendering: evolved trees can be deep enough to make
        # recursion risky.
        out: list[str] = []
        stack: list[Node | str] = [self]
        while stack:
            item = stack.pop()
            if isinstance(item, str):
                out.append(item)
            elif item.is_terminal:
                out.append(item.symbol)
            else:
                out.append("(" + item.symbol)
                stack.append(")")
                for child in reversed(item.children):
                    stack.append(child)
                    stack.append(" ")
        return "".join(out)


@dataclass(frozen=True)
class Violation:
    """One feasibility-rule failure, pointing at the offending node."""

    rule: str
    cursor: int
    message: str


class GenomeTree:
    """An immutable tree with stable preorder-index cursors.

    A cursor is an integer index into the preorder traversal (root = 0).
    Cursors are only meaningful for the exact tree revision that issued
    them; every edit returns a new :class:`GenomeTree`.
    """

    __slots__ = ("root", "_nodes", "_parents", "_depths", "_sizes")

    def __init__(self, root: Node) -> None:
        nodes: list[Node] = []
        parents: list[int] = []
        depths: list[int] = []
        stack: list[tuple[Node, int, int]] = [(root, -1, 1)]
        while stack:
            node, parent, depth = stack.pop()
            index = len(nodes)
            nodes.append(node)
            parents.append(parent)
            depths.append(depth)
            for child in reversed(node.children):
                stack.append((child, index, depth + 1))
        sizes = [1] * len(nodes)
        for i in range(len(nodes) - 1, 0, -1):
            sizes[parents[i]] += sizes[i]
        self.root = root
        self._nodes = nodes
        self._parents = parents
        self._depths = depths
        self._sizes = sizes

    # -- structural queries -------------------------------------------------

    def node_count(self) -> int:
        return len(self._nodes)

    def cursors(self) -> range:
        return range(len(self._nodes))

    def node_at(self, cursor: int) -> Node:
        self._check_cursor(cursor)
        return self._nodes[cursor]

    def parent_of(self, cursor: int) -> int | None:
        """Cursor of the parent node, or None for the root."""
        self._check_cursor(cursor)
        parent = self._parents[cursor]
        return None if parent < 0 else parent

    def ancestors(self, cursor: int) -> Iterator[int]:
        """Cursors on the path from the node's parent up to the root."""
        self._check_cursor(cursor)
        parent = self._parents[cursor]
        while parent >= 0:
            yield parent
            parent = self._parents[parent]

    def depth_of(self, cursor: int) -> int:
        """Depth of the node, with the root at depth 1."""
        self._check_cursor(cursor)
        return self._depths[cursor]

    def depth(self) -> int:
        return max(self._depths)

    def subtree_size(self, cursor: int) -> int:
        """Node count of the subtree rooted at the cursor."""
        self._check_cursor(cursor)
        return self._sizes[cursor]

    def subtree_sizes(self) -> list[int]:
        """Subtree sizes for every cursor, in preorder."""
        return list(self._sizes)

    def child_cursors(self, cursor: int) -> list[int]:
        self._check_cursor(cursor)
        out: list[int] = []
        child = cursor + 1
        for _ in self._nodes[cursor].children:
            out.append(child)
            child += self._sizes[child]
        return out

    def leaves_in_order(self) -> list[int]:
        """Leaf cursors left to right; this order is the phenotype's block chain."""
        return [c for c, node in enumerate(self._nodes) if node.is_terminal]

    def stride_count(self) -> int:
        return sum(1 for node in self._nodes if node.symbol == STRIDE)

    # -- feasibility --------------------------------------------------------

    def validate(self, block_ids: Sequence[str] | None = None) -> list[Violation]:
        """Check every feasibility rule; an empty list means the tree is ok.

        When ``block_ids`` is given, terminals must also be members of that
        block library.
        """
        violations: list[Violation] = []
        if self._nodes[0].symbol != PLUS:
            violations.append(
                Violation(
                    "root-plus",
                    0,
                    f"root must be {PLUS!r}, found {self._nodes[0].symbol!r}",
                )
            )
        total_strides = self.stride_count()
        strides_seen = 0
        for cursor, node in enumerate(self._nodes):
            expected = ARITY.get(node.symbol)
            if expected is None:
                if node.children:
                    violations.append(
                        Violation(
                            "arity",
                            cursor,
                            f"terminal {node.symbol!r} cannot have children",
                        )
                    )
                if block_ids is not None and node.symbol not in block_ids:
                    violations.append(
                        Violation(
                            "unknown-block",
                            cursor,
                            f"unknown block type {node.symbol!r}",
                        )
                    )
                continue
            if len(node.children) != expected:
                violations.append(
                    Violation(
                        "arity",
                        cursor,
                        f"{node.symbol!r} expects {expected} argument(s),"
                        f" found {len(node.children)}",
                    )
                )
            if node.symbol == STRIDE:
                strides_seen += 1
                if strides_seen == STRIDE_BUDGET + 1:
                    violations.append(
                        Violation(
                            "stride-budget",
                            cursor,
                            f"tree has {total_strides} {STRIDE!r} nodes;"
                            f" at most {STRIDE_BUDGET} allowed",
                        )
                    )
                if node.children and not node.children[0].is_terminal:
                    violations.append(
                        Violation(
                            "stride-child-terminal",
                            cursor,
                            f"{STRIDE!r} child must be a terminal,"
                            f" found {node.children[0].symbol!r}",
                        )
                    )
        return violations

    def is_valid(self, block_ids: Sequence[str] | None = None) -> bool:
        return not self.validate(block_ids)

    # -- edits ---------------------------------------------------------------

    def replace_subtree(self, at: int, fragment: "Node | GenomeTree") -> "GenomeTree":
        """Return a new tree with the subtree at ``at`` swapped for ``fragment``.

        The input tree is left untouched.  The result may violate the
        stride rules; callers introducing arbitrary fragments must repair
        before use.  Replacing the root is rejected: the root identity is
        fixed.
        """
        self._check_cursor(at)
        if at == 0:
            raise GenomeError("refusing to replace the root; the root is fixed")
        replacement = fragment.root if isinstance(fragment, GenomeTree) else fragment
        cursor = at
        while cursor != 0:
            parent = self._parents[cursor]
            parent_node = self._nodes[parent]
            slot = self.child_cursors(parent).index(cursor)
            kids = list(parent_node.children)
            kids[slot] = replacement
            replacement = Node(parent_node.symbol, tuple(kids))
            cursor = parent
        return GenomeTree(replacement)

    # -- value semantics -----------------------------------------------------

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, GenomeTree):
            return NotImplemented
        return self.root == other.root

    def __hash__(self) -> int:
        return hash(self.root)

    def __str__(self) -> str:
        return str(self.root)

    def __repr__(self) -> str:
        return f"GenomeTree({str(self)!r})"

    def _check_cursor(self, cursor: int) -> None:
        if not isinstance(cursor, int) or not 0 <= cursor < len(self._nodes):
            raise GenomeError(
                f"cursor {cursor!r} does not address a node of this tree"
            )


@dataclass(frozen=True)
class Individual:
    """A genome plus its cached fitness and bookkeeping.

    ``canonical_key`` is the genome's canonical s-expression and doubles as
    the fitness-cache key.
    """

    genome: GenomeTree
    fitness: float | None = None
    birth_generation: int = 0
    canonical_key: str = field(init=False, compare=False)

    def __post_init__(self) -> None:
        if self.fitness is not None and not 0.0 <= self.fitness <= 1.0:
            raise ValueError(f"fitness must lie in [0, 1], got {self.fitness!r}")
        if self.birth_generation < 0:
            raise ValueError("birth_generation must be >= 0")
        object.__setattr__(self, "canonical_key", str(self.genome))

    def with_fitness(self, fitness: float) -> "Individual":
        return dataclasses.replace(self, fitness=fitness)

    def node_count(self) -> int:
        return self.genome.node_count()
