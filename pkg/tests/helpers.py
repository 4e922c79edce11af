"""Shared fixtures: canonical trees and small tree generators."""
from __future__ import annotations

import itertools

from flagcalc.flagtree import FlagTree, Leaf, Vertex

BI_PARAM_EXPR = "D[0.5,1.0](D[0.3,0.2](f1*f2)*f3*D[0.7,0.1](f4*f5))"
ONE_PARAM_EXPR = "D[0.5](D[0.3](f1*f2)*f3*D[0.7](f4*f5))"


def five_linear(beta=(0.5, 1.0), alpha=(0.3, 0.2), gamma=(0.7, 0.1)) -> FlagTree:
    a = Vertex(alpha, (Leaf(1), Leaf(2)))
    g = Vertex(gamma, (Leaf(4), Leaf(5)))
    return FlagTree(Vertex(beta, (a, Leaf(3), g)))


def shapes(max_nodes: int):
    """Every plane tree shape with at most ``max_nodes`` nodes (leaves included).

    A shape is ``"L"`` for a leaf or a tuple of at least two child shapes.
    Yields (shape, node count).
    """
    memo = {1: ["L"]}

    def of_size(k):
        if k in memo:
            return memo[k]
        out = []
        # a vertex (1 node) with children summing to k - 1 nodes, >= 2 children
        for parts in _compositions(k - 1):
            if len(parts) < 2:
                continue
            for kids in itertools.product(*[of_size(p) for p in parts]):
                out.append(tuple(kids))
        memo[k] = out
        return out

    for k in range(3, max_nodes + 1):
        for s in of_size(k):
            yield s, k


def _compositions(total):
    if total == 0:
        yield ()
        return
    for first in range(1, total + 1):
        for rest in _compositions(total - first):
            yield (first,) + rest


def build(shape, orders_for, labels=None) -> FlagTree:
    """Materialize a shape; leaves are numbered in pre-order unless ``labels`` permutes them."""
    counter = itertools.count(1)
    vcount = itertools.count(0)

    def go(s):
        if s == "L":
            i = next(counter)
            return Leaf(labels[i - 1] if labels else i)
        vid = next(vcount)
        return Vertex(orders_for(vid), tuple(go(c) for c in s))

    root = go(shape)
    return FlagTree(root)


def leaf_count(shape) -> int:
    return 1 if shape == "L" else sum(leaf_count(c) for c in shape)


def brute_force_maps(tree: FlagTree) -> set:
    """Enumerate every vertex -> leaf assignment and keep the consistent ones.

    Consistency is checked along whole paths: if v sends its derivative to
    leaf l, every vertex strictly between v and l must send its derivative to
    l as well.  This is a different formulation from the child-by-child rule
    in the library, and the two must agree.
    """
    nv = len(tree.vertices)
    choices = [sorted(tree._leaves_under[v]) for v in range(nv)]
    good = set()
    for a in itertools.product(*choices):
        ok = True
        for v in range(nv):
            for w in tree.path_to_leaf(v, a[v])[1:]:
                if a[w] != a[v]:
                    ok = False
                    break
            if not ok:
                break
        if ok:
            good.add(a)
    return good
