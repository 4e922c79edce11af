"""Text syntax for flag trees.

::

    expr  := term ("*" term)+ | term
    term  := leaf | "D[" num ("," num)* "](" expr ")" | "J[" num ("," num)* "](" expr ")"
    leaf  := "f" int
    num   := nonnegative decimal

A product at the top level gets an implicit root with all orders zero.
Whitespace between tokens is ignored.  Error offsets count UTF-8 bytes.
"""
from __future__ import annotations

import re
from dataclasses import dataclass
from decimal import Decimal

from ..flagtree import FlagForest, FlagTree, Leaf, Vertex, format_tree

_NUM = re.compile(r"\d+(?:\.\d*)?|\.\d+")
_INT = re.compile(r"\d+")


class DSLError(ValueError):
    """Base class; ``offset`` is the byte offset of the problem in the input."""

    def __init__(self, message: str, offset: int):
        self.offset = offset
        super().__init__(f"{message} at byte {offset}")


class DSLSyntaxError(DSLError):
    pass


class DSLStructureError(DSLError):
    """Well-formed text that does not describe a valid tree."""


@dataclass
class _Node:
    kind: str | None          # None for a leaf
    orders: tuple
    children: list
    pos: int
    index: int = 0


class _Parser:
    def __init__(self, text: str, N: int | None):
        self.text = text
        self.i = 0
        self.N = N

    def byte(self, i: int) -> int:
        return len(self.text[:i].encode("utf-8"))

    def fail(self, msg: str, i: int | None = None):
        raise DSLSyntaxError(msg, self.byte(self.i if i is None else i))

    def skip(self):
        while self.i < len(self.text) and self.text[self.i].isspace():
            self.i += 1

    def peek(self) -> str:
        self.skip()
        return self.text[self.i] if self.i < len(self.text) else ""

    def expect(self, ch: str):
        if self.peek() != ch:
            got = repr(self.peek()) if self.peek() else "end of input"
            self.fail(f"expected {ch!r}, found {got}")
        self.i += 1

    def expr(self) -> list:
        terms = [self.term()]
        while self.peek() == "*":
            self.i += 1
            terms.append(self.term())
        return terms

    def term(self) -> _Node:
        c = self.peek()
        start = self.i
        if c == "f":
            self.i += 1
            m = _INT.match(self.text, self.i)
            if not m:
                self.fail("expected a leaf index after 'f'")
            self.i = m.end()
            return _Node(None, (), [], start, int(m.group()))
        if c in ("D", "J"):
            self.i += 1
            self.expect("[")
            orders = [self.num()]
            while self.peek() == ",":
                self.i += 1
                orders.append(self.num())
            self.expect("]")
            if self.N is None:
                self.N = len(orders)
            elif len(orders) != self.N:
                raise DSLStructureError(f"{c} carries {len(orders)} orders, expected {self.N}",
                                        self.byte(start))
            self.expect("(")
            kids = self.expr()
            self.expect(")")
            if len(kids) < 2:
                raise DSLStructureError(f"{c} needs a product of at least two factors",
                                        self.byte(start))
            return _Node(c, tuple(orders), kids, start)
        got = repr(c) if c else "end of input"
        self.fail(f"expected a leaf or D[...]/J[...], found {got}")

    def num(self) -> Decimal:
        self.skip()
        m = _NUM.match(self.text, self.i)
        if not m:
            self.fail("expected a nonnegative decimal")
        self.i = m.end()
        return Decimal(m.group())


def _build(node: _Node, seen: dict, parser: _Parser):
    if node.kind is None:
        if node.index in seen:
            raise DSLStructureError(f"duplicate leaf f{node.index}", parser.byte(node.pos))
        if node.index < 1:
            raise DSLStructureError("leaf indices start at 1", parser.byte(node.pos))
        seen[node.index] = node.pos
        return Leaf(node.index)
    return Vertex(node.orders, tuple(_build(c, seen, parser) for c in node.children), node.kind)


def parse_tree(text: str, N: int | None = None) -> FlagTree:
    """Parse an expression into a ``FlagTree`` with ``N`` parameters.

    ``N`` defaults to the number of orders on the first vertex.
    """
    p = _Parser(text, N)
    terms = p.expr()
    if p.peek():
        p.fail(f"unexpected {p.peek()!r}")
    if len(terms) == 1:
        root = terms[0]
        if root.kind is None:
            raise DSLStructureError("a single leaf is not a flag tree", p.byte(root.pos))
    else:
        if p.N is None:
            raise DSLStructureError("a bare product needs the parameter count N", 0)
        root = _Node("D", (Decimal(0),) * p.N, terms, 0)
    seen: dict = {}
    built = _build(root, seen, p)
    n = len(seen)
    missing = sorted(set(range(1, n + 1)) - set(seen))
    if missing:
        raise DSLStructureError(f"leaves must be f1..f{n}; missing f{missing[0]}",
                                p.byte(len(text)))
    return FlagTree(built, p.N)


def print_tree(tree: FlagTree) -> str:
    return format_tree(tree)


def parse_forest(texts) -> FlagForest:
    return FlagForest([parse_tree(t, 1) for t in texts])


# ---------------------------------------------------------------------------
# JSON form

def tree_to_json(tree: FlagTree) -> dict:
    def node(v):
        if isinstance(v, Leaf):
            return {"leaf": v.index}
        return {"kind": v.kind, "orders": [str(b) for b in v.orders],
                "children": [node(c) for c in v.children]}
    return {"parameters": tree.parameters, "root": node(tree.root)}


def tree_from_json(data: dict) -> FlagTree:
    def node(d):
        if "leaf" in d:
            return Leaf(int(d["leaf"]))
        return Vertex(tuple(Decimal(str(b)) for b in d["orders"]),
                      tuple(node(c) for c in d["children"]), d.get("kind", "D"))
    return FlagTree(node(data["root"]), data.get("parameters"))
