"""Parser and printer for the genome s-expression syntax.

The canonical textual form is fully parenthesised prefix notation with a
single space between siblings, e.g. ``(+ (^2 b1) (str b2))``.  The string
is bit-stable: it is the on-disk genome format (one genome per line in
population files) and the fitness-cache key.  ``∧2`` and ``∧3`` are
accepted on input as aliases for ``^2`` and ``^3``; the printer always
emits ASCII.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

from .genome import ARITY, DEFAULT_BLOCK_IDS, GenomeTree, Node

# ∧ is the logical-and glyph sometimes used for the widen operators.
_ALIAS_MAP = {"∧2": "^2", "∧3": "^3"}

_SYMBOL_CHARS = frozenset(
    "abcdefghijklmnopqrstuvwxyz"
    "ABCDEFGHIJKLMNOPQRSTUVWXYZ"
    "0123456789"
    "^+-_∧"
)
_WHITESPACE = frozenset(" \t\r\n")


class ParseError(ValueError):
    """Syntax or feasibility failure, carrying the byte offset of the cause.

    ``kind`` is one of ``lexical``, ``syntax``, ``arity``,
    ``unknown-symbol`` or ``feasibility``.
    """

    def __init__(self, kind: str, message: str, offset: int) -> None:
        super().__init__(f"{message} (byte {offset})")
        self.kind = kind
        self.offset = offset


@dataclass
class _Frame:
    symbol: str
    offset: int
    children: list[Node] = field(default_factory=list)


def _tokenize(text: str) -> list[tuple[str, str, int]]:
    """Split into ``(kind, value, byte_offset)`` tokens.

    Kinds are ``(``, ``)`` and ``sym``; offsets address the token start in
    the UTF-8 encoding of the input.
    """
    tokens: list[tuple[str, str, int]] = []
    offset = 0
    i = 0
    n = len(text)
    while i < n:
        ch = text[i]
        if ch in _WHITESPACE:
            offset += len(ch.encode("utf-8"))
            i += 1
            continue
        if ch in "()":
            tokens.append((ch, ch, offset))
            offset += 1
            i += 1
            continue
        if ch not in _SYMBOL_CHARS:
            raise ParseError("lexical", f"bad character {ch!r}", offset)
        start_offset = offset
        start = i
        while i < n and text[i] in _SYMBOL_CHARS:
            offset += len(text[i].encode("utf-8"))
            i += 1
        tokens.append(("sym", text[start:i], start_offset))
    return tokens


def parse(
    text: str,
    block_ids: Sequence[str] = DEFAULT_BLOCK_IDS,
    check: bool = True,
) -> GenomeTree:
    """Parse one s-expression into a :class:`GenomeTree`.

    With ``check`` enabled (the default) the tree must also pass every
    feasibility rule; the first violation is reported as a ``feasibility``
    :class:`ParseError` whose offset points at the offending node's token.
    ``check=False`` skips only that step, so callers can collect the full
    violation list themselves.
    """
    tokens = _tokenize(text)
    end_offset = len(text.encode("utf-8"))
    if not tokens:
        raise ParseError("syntax", "empty input", 0)

    stack: list[_Frame] = []
    result: Node | None = None
    node_offsets: dict[int, int] = {}

    def close(node: Node, offset: int) -> None:
        nonlocal result
        node_offsets[id(node)] = offset
        if stack:
            frame = stack[-1]
            frame.children.append(node)
            if len(frame.children) > ARITY[frame.symbol]:
                raise ParseError(
                    "arity",
                    f"{frame.symbol!r} takes {ARITY[frame.symbol]} argument(s)",
                    offset,
                )
        else:
            result = node

    i = 0
    while i < len(tokens):
        kind, value, offset = tokens[i]
        if result is not None:
            raise ParseError("syntax", "unexpected trailing input", offset)
        if kind == "(":
            if i + 1 >= len(tokens) or tokens[i + 1][0] != "sym":
                bad = tokens[i + 1][2] if i + 1 < len(tokens) else end_offset
                raise ParseError("syntax", "expected an operator after '('", bad)
            head_raw, head_offset = tokens[i + 1][1], tokens[i + 1][2]
            head = _ALIAS_MAP.get(head_raw, head_raw)
            if head not in ARITY:
                if head in block_ids:
                    raise ParseError(
                        "arity",
                        f"terminal {head!r} cannot take arguments",
                        head_offset,
                    )
                raise ParseError(
                    "unknown-symbol", f"unknown operator {head_raw!r}", head_offset
                )
            stack.append(_Frame(head, offset))
            i += 2
            continue
        if kind == ")":
            if not stack:
                raise ParseError("syntax", "unbalanced ')'", offset)
            frame = stack.pop()
            if len(frame.children) != ARITY[frame.symbol]:
                raise ParseError(
                    "arity",
                    f"{frame.symbol!r} expects {ARITY[frame.symbol]} argument(s),"
                    f" found {len(frame.children)}",
                    frame.offset,
                )
            close(Node(frame.symbol, tuple(frame.children)), frame.offset)
            i += 1
            continue
        symbol = _ALIAS_MAP.get(value, value)
        if symbol in ARITY:
            raise ParseError(
                "arity",
                f"operator {symbol!r} needs parentheses and arguments",
                offset,
            )
        if symbol not in block_ids:
            raise ParseError("unknown-symbol", f"unknown block type {value!r}", offset)
        close(Node(symbol), offset)
        i += 1

    if stack:
        raise ParseError("syntax", "missing ')'", end_offset)
    assert result is not None
    tree = GenomeTree(result)
    if check:
        violations = tree.validate(block_ids)
        if violations:
            first = violations[0]
            offset = node_offsets[id(tree.node_at(first.cursor))]
            raise ParseError("feasibility", first.message, offset)
    return tree


def print_tree(tree: GenomeTree | Node) -> str:
    """Render the canonical s-expression for a tree (or tree fragment)."""
    return str(tree.root if isinstance(tree, GenomeTree) else tree)
