"""Rooted flag trees, derivative distribution maps and exponent constraints.

A flag tree encodes a nested product of fractional derivatives such as
``D^b(D^a(f1 f2) f3 D^c(f4 f5))``.  Internal vertices carry one derivative
order per parameter, leaves are the input functions ``f_1, ..., f_n``.

Vertices are identified by their pre-order index (the root is 0).  Leaves are
referred to by their 1-based index, either as ``Leaf(l)`` or as the string
``"f<l>"``.
"""
from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from decimal import Decimal
from fractions import Fraction
from typing import Iterable, Sequence, Union

INF = math.inf

HOMOGENEOUS = "D"
INHOMOGENEOUS = "J"


def to_decimal(value) -> Decimal:
    """Convert an order to an exact decimal (floats go through their repr)."""
    if isinstance(value, Decimal):
        return value
    if isinstance(value, float):
        if not math.isfinite(value):
            raise ValueError(f"derivative order must be finite, got {value!r}")
        return Decimal(repr(value))
    if isinstance(value, Fraction):
        return Decimal(value.numerator) / Decimal(value.denominator)
    return Decimal(str(value))


def is_positive_even_integer(value: Decimal) -> bool:
    return value > 0 and value == value.to_integral_value() and int(value) % 2 == 0


@dataclass(frozen=True)
class Leaf:
    index: int

    def __post_init__(self):
        if not isinstance(self.index, int) or self.index < 1:
            raise ValueError(f"leaf index must be a positive integer, got {self.index!r}")


@dataclass(frozen=True)
class Vertex:
    orders: tuple
    children: tuple
    kind: str = HOMOGENEOUS
    name: str | None = field(default=None, compare=False)

    def __post_init__(self):
        object.__setattr__(self, "orders", tuple(to_decimal(b) for b in self.orders))
        object.__setattr__(self, "children", tuple(self.children))
        if self.kind not in (HOMOGENEOUS, INHOMOGENEOUS):
            raise ValueError(f"vertex kind must be 'D' or 'J', got {self.kind!r}")
        for b in self.orders:
            if b < 0:
                raise ValueError(f"derivative orders must be nonnegative, got {b}")
        if len(self.children) < 2:
            raise ValueError("every internal vertex needs at least two children")
        for c in self.children:
            if not isinstance(c, (Leaf, Vertex)):
                raise TypeError(f"children must be Leaf or Vertex, got {type(c).__name__}")


Node = Union[Leaf, Vertex]


class FlagTree:
    """A rooted flag tree over ``parameters`` parameters.

    Parameters
    ----------
    root : Vertex
        The root vertex; the tree structure hangs off its children.
    parameters : int
        Number of parameters N; every vertex carries N orders.
    """

    def __init__(self, root: Vertex, parameters: int | None = None):
        if not isinstance(root, Vertex):
            raise TypeError("the root of a flag tree must be a Vertex")
        if parameters is None:
            parameters = len(root.orders)
        if parameters < 1:
            raise ValueError("a flag tree needs at least one parameter")
        self.root = root
        self.parameters = parameters

        self.vertices: list[Vertex] = []
        self._parent: list[int | None] = []
        self._leaf_parent: dict[int, int] = {}
        self._leaf_depth: dict[int, int] = {}
        self._leaves_under: list[frozenset] = []
        seen: list[int] = []

        def walk(v: Vertex, parent: int | None, depth: int) -> frozenset:
            if len(v.orders) != parameters:
                raise ValueError(
                    f"vertex carries {len(v.orders)} orders, expected {parameters}")
            vid = len(self.vertices)
            self.vertices.append(v)
            self._parent.append(parent)
            self._leaves_under.append(frozenset())
            acc = set()
            for c in v.children:
                if isinstance(c, Leaf):
                    seen.append(c.index)
                    self._leaf_parent[c.index] = vid
                    self._leaf_depth[c.index] = depth + 1
                    acc.add(c.index)
                else:
                    acc |= walk(c, vid, depth + 1)
            self._leaves_under[vid] = frozenset(acc)
            return self._leaves_under[vid]

        walk(root, None, 0)
        n = len(seen)
        if len(set(seen)) != n:
            dup = sorted(l for l in set(seen) if seen.count(l) > 1)
            raise ValueError(f"duplicate leaves: {dup}")
        if set(seen) != set(range(1, n + 1)):
            missing = sorted(set(range(1, n + 1)) - set(seen))
            raise ValueError(f"leaves must be f1..f{n}; missing {missing}")
        self.n = n
        self._ids = {id(v): i for i, v in enumerate(self.vertices)}
        self._names = {v.name: i for i, v in enumerate(self.vertices) if v.name}

    def __eq__(self, other):
        return (isinstance(other, FlagTree) and self.parameters == other.parameters
                and self.root == other.root)

    def __hash__(self):
        return hash((self.root, self.parameters))

    def __repr__(self):
        return f"FlagTree({self.root!r}, parameters={self.parameters})"

    @property
    def complexity(self) -> int:
        """Maximal leaf depth."""
        return max(self._leaf_depth.values())

    @property
    def derivative_kind(self) -> str:
        kinds = {v.kind for v in self.vertices}
        if kinds == {HOMOGENEOUS}:
            return "homogeneous"
        if kinds == {INHOMOGENEOUS}:
            return "inhomogeneous"
        return "mixed"

    def vertex_id(self, ref) -> int:
        """Resolve a vertex reference (pre-order id, name or Vertex object)."""
        if isinstance(ref, bool):
            raise KeyError(f"unknown vertex {ref!r}")
        if isinstance(ref, int):
            if 0 <= ref < len(self.vertices):
                return ref
        elif isinstance(ref, Vertex):
            if id(ref) in self._ids:
                return self._ids[id(ref)]
        elif isinstance(ref, str) and ref in self._names:
            return self._names[ref]
        raise KeyError(f"unknown vertex {ref!r}")

    def leaf_index(self, ref) -> int | None:
        if isinstance(ref, Leaf):
            return ref.index if ref.index in self._leaf_depth else None
        if isinstance(ref, str) and ref.startswith("f") and ref[1:].isdigit():
            l = int(ref[1:])
            return l if l in self._leaf_depth else None
        return None

    def orders(self, v) -> tuple:
        return self.vertices[self.vertex_id(v)].orders

    def parent(self, v) -> int | None:
        return self._parent[self.vertex_id(v)]

    def children_ids(self, v) -> list:
        """Children of a vertex: ints for vertices, ``Leaf`` for leaves."""
        out = []
        for c in self.vertices[self.vertex_id(v)].children:
            out.append(c if isinstance(c, Leaf) else self._ids[id(c)])
        return out

    def path_to_leaf(self, v, l: int) -> list[int]:
        """Vertex ids on the downward path from ``v`` to leaf ``l`` (``v`` included)."""
        vid = self.vertex_id(v)
        if l not in self._leaves_under[vid]:
            raise ValueError(f"leaf f{l} is not below vertex {vid}")
        path = []
        w = self._leaf_parent[l]
        while w is not None:
            path.append(w)
            if w == vid:
                break
            w = self._parent[w]
        return path[::-1]

    def total_order(self, j: int) -> Decimal:
        """Sum of the parameter-``j`` orders (``j`` is 1-based)."""
        return sum((v.orders[j - 1] for v in self.vertices), Decimal(0))


class FlagForest:
    """One single-parameter flag tree per parameter over a shared leaf set."""

    def __init__(self, trees: Sequence[FlagTree]):
        trees = tuple(trees)
        if not trees:
            raise ValueError("a forest needs at least one tree")
        for t in trees:
            if t.parameters != 1:
                raise ValueError("each tree of a forest carries only its own parameter")
        if len({t.n for t in trees}) != 1:
            raise ValueError("all trees of a forest must share the leaf set")
        self.trees = trees
        self.parameters = len(trees)
        self.n = trees[0].n

    def __eq__(self, other):
        return isinstance(other, FlagForest) and self.trees == other.trees

    def __hash__(self):
        return hash(self.trees)

    def __repr__(self):
        return f"FlagForest({list(self.trees)!r})"

    @property
    def derivative_kind(self) -> str:
        kinds = {t.derivative_kind for t in self.trees}
        return kinds.pop() if len(kinds) == 1 else "mixed"

    def tree(self, j: int) -> FlagTree:
        return self.trees[j - 1]


def format_tree(tree: FlagTree) -> str:
    """Canonical expression text, e.g. ``D[0.5](D[1](f1*f2)*f3)``.

    A root with all orders zero and kind ``D`` is written as a bare product.
    """
    def node(c) -> str:
        if isinstance(c, Leaf):
            return f"f{c.index}"
        body = "*".join(node(x) for x in c.children)
        return f"{c.kind}[" + ",".join(_fmt_order(b) for b in c.orders) + f"]({body})"

    r = tree.root
    if r.kind == HOMOGENEOUS and all(b == 0 for b in r.orders):
        return "*".join(node(x) for x in r.children)
    return node(r)


def _parameter_views(obj) -> list[tuple[FlagTree, int]]:
    """(tree, order slot) for each parameter of a tree or forest."""
    if isinstance(obj, FlagForest):
        return [(t, 0) for t in obj.trees]
    if isinstance(obj, FlagTree):
        return [(obj, j) for j in range(obj.parameters)]
    raise TypeError(f"expected FlagTree or FlagForest, got {type(obj).__name__}")


def leaves_under(tree: FlagTree, v) -> frozenset:
    """Indices of the leaves below ``v``; a leaf reference gives its singleton."""
    l = tree.leaf_index(v)
    if l is not None:
        return frozenset({l})
    return tree._leaves_under[tree.vertex_id(v)]


# ---------------------------------------------------------------------------
# derivative distribution maps

@dataclass(frozen=True)
class DerivativeMap:
    """A tuple of maps delta_j, one per parameter.

    ``assignments[j][v]`` is the leaf receiving the parameter-(j+1) derivative
    of vertex ``v``.  ``weights[j][v]`` is the corresponding order.
    """
    assignments: tuple
    weights: tuple = field(compare=False, repr=False)
    n: int = field(compare=False, repr=False)

    @property
    def parameters(self) -> int:
        return len(self.assignments)

    def orders_for(self, l: int) -> tuple:
        return tuple(delta_inverse(self, l, j) for j in range(1, self.parameters + 1))


def single_parameter_maps(tree: FlagTree) -> list[tuple]:
    """All admissible maps for one parameter, as tuples indexed by vertex id.

    A map sends each vertex to a leaf below it.  When that leaf sits under a
    non-leaf child ``w``, the map must agree with its value at ``w``.  Hence
    ``delta(v)`` is either a leaf child of ``v`` or ``delta(w)`` for a vertex
    child ``w``.  The result is sorted lexicographically.
    """
    nv = len(tree.vertices)

    def build(vid: int) -> list[dict]:
        kids = tree.children_ids(vid)
        sub = [build(c) for c in kids if isinstance(c, int)]
        out = []
        for combo in itertools.product(*sub):
            merged = {}
            for part in combo:
                merged.update(part)
            for c in kids:
                target = c.index if isinstance(c, Leaf) else merged[c]
                d = dict(merged)
                d[vid] = target
                out.append(d)
        return out

    maps = [tuple(d[v] for v in range(nv)) for d in build(0)]
    return sorted(set(maps))


def is_admissible(tree: FlagTree, assignment: Sequence[int]) -> bool:
    """Check one single-parameter map against the two composition conditions."""
    if len(assignment) != len(tree.vertices):
        return False
    for vid, l in enumerate(assignment):
        if l not in tree._leaves_under[vid]:
            return False
        for c in tree.children_ids(vid):
            if isinstance(c, int) and l in tree._leaves_under[c] and assignment[c] != l:
                return False
    return True


def enumerate_delta_maps(tree_or_forest) -> list[DerivativeMap]:
    """All admissible derivative maps, ordered lexicographically.

    For a tree with N parameters the same single-parameter maps are combined
    across parameters; for a forest each parameter uses its own tree.
    """
    views = _parameter_views(tree_or_forest)
    per_param = [single_parameter_maps(t) for t, _ in views]
    weights = tuple(tuple(v.orders[slot] for v in t.vertices) for t, slot in views)
    n = views[0][0].n
    return [DerivativeMap(tuple(combo), weights, n)
            for combo in itertools.product(*per_param)]


def delta_inverse(dmap: DerivativeMap, l: int, j: int) -> Decimal:
    """Total parameter-``j`` order routed to leaf ``l`` (``j`` is 1-based)."""
    a = dmap.assignments[j - 1]
    w = dmap.weights[j - 1]
    return sum((w[v] for v in range(len(a)) if a[v] == l), Decimal(0))


def branch_weight(tree: FlagTree, v, l: int, j: int) -> Decimal:
    """Sum of parameter-``j`` orders on the path from ``v`` down to leaf ``l``."""
    if tree.leaf_index(v) is not None:
        if tree.leaf_index(v) != l:
            raise ValueError(f"leaf {v!r} is not f{l}")
        return Decimal(0)
    return sum((tree.vertices[w].orders[j - 1] for w in tree.path_to_leaf(v, l)),
               Decimal(0))


# ---------------------------------------------------------------------------
# exponents

def _reciprocal(p) -> Fraction:
    if isinstance(p, str):
        s = p.strip().lower()
        if s in ("inf", "infinity", "oo", "∞"):
            return Fraction(0)
        p = Fraction(s)
    if isinstance(p, float):
        if math.isnan(p):
            raise ValueError("exponent is NaN")
        if math.isinf(p):
            if p < 0:
                raise ValueError("negative exponent")
            return Fraction(0)
        p = Fraction(repr(p))
    p = Fraction(p)
    if p <= 0:
        raise ValueError(f"malformed exponent {p}")
    return 1 / p


def _from_reciprocal(q: Fraction):
    return INF if q == 0 else 1 / q


def format_exponent(p) -> str:
    if p == INF:
        return "inf"
    p = Fraction(p)
    return str(p.numerator) if p.denominator == 1 else f"{p.numerator}/{p.denominator}"


class ExponentTuple:
    """Lebesgue exponents p[l][j] of the inputs and the Hölder target r[j].

    Exponents are kept as exact reciprocals (``Fraction``), with 0 standing
    for infinity.  ``r`` is derived by Hölder unless given explicitly.
    """

    def __init__(self, p: Sequence, parameters: int | None = None, r: Sequence | None = None,
                 allow_below_one: bool = False):
        rows = []
        for row in p:
            if isinstance(row, (list, tuple)):
                rows.append(list(row))
            else:
                rows.append([row])
        if parameters is None:
            parameters = max(len(row) for row in rows)
        self.parameters = parameters
        recips = []
        for l, row in enumerate(rows, start=1):
            if len(row) == 1 and parameters > 1:
                row = row * parameters
            if len(row) != parameters:
                raise ValueError(f"f{l}: expected {parameters} exponents, got {len(row)}")
            q = tuple(_reciprocal(x) for x in row)
            if not allow_below_one and any(x > 1 for x in q):
                raise ValueError(f"malformed exponent for f{l}: every p must lie in [1, inf]")
            recips.append(q)
        self.n = len(recips)
        self.recip = tuple(recips)
        holder = tuple(sum((q[j] for q in self.recip), Fraction(0)) for j in range(parameters))
        self.holder_recip = holder
        if r is None:
            self.r_recip = holder
        else:
            if not isinstance(r, (list, tuple)):
                r = [r] * parameters
            self.r_recip = tuple(_reciprocal(x) for x in r)

    @classmethod
    def uniform(cls, n: int, parameters: int, p) -> "ExponentTuple":
        return cls([[p] * parameters for _ in range(n)], parameters)

    def p(self, l: int, j: int):
        return _from_reciprocal(self.recip[l - 1][j - 1])

    def r(self, j: int):
        return _from_reciprocal(self.r_recip[j - 1])

    def p_vector(self, l: int) -> tuple:
        return tuple(float(self.p(l, j)) for j in range(1, self.parameters + 1))

    def r_vector(self) -> tuple:
        return tuple(float(self.r(j)) for j in range(1, self.parameters + 1))

    @property
    def holder_holds(self) -> bool:
        return self.r_recip == self.holder_recip

    def __repr__(self):
        rows = ["(" + ",".join(format_exponent(self.p(l, j)) for j in range(1, self.parameters + 1)) + ")"
                for l in range(1, self.n + 1)]
        return f"ExponentTuple([{', '.join(rows)}])"


def vertex_exponent(tree: FlagTree, v, exponents: ExponentTuple) -> tuple:
    """Harmonic-sum exponents p_v^j over the leaves below ``v``."""
    leaves = leaves_under(tree, v)
    out = []
    for j in range(tree.parameters):
        q = sum((exponents.recip[l - 1][j] for l in leaves), Fraction(0))
        out.append(_from_reciprocal(q))
    return tuple(out)


@dataclass(frozen=True)
class Constraint:
    """One lower bound ``1/p_v^j < min_{j'} (1 + beta_{j'}^v)`` (d = 1)."""
    vertex: int
    label: str
    parameter: int
    governing: tuple
    exempt: tuple
    leaves: tuple
    lhs: Fraction
    bound: Fraction

    @property
    def holds(self) -> bool:
        return self.lhs < self.bound

    def render(self) -> str:
        left = " + ".join(f"1/p_{l}^{self.parameter}" for l in self.leaves)
        rhs = [f"(d_{g}+{self.label}_{g})/d_{g}" for g in self.governing]
        right = rhs[0] if len(rhs) == 1 else "min(" + ", ".join(rhs) + ")"
        return f"{left} < {right}"


@dataclass(frozen=True)
class Violation:
    kind: str
    message: str
    vertex: int | None = None
    parameter: int | None = None
    bound: Fraction | None = None

    def __str__(self):
        return self.message


@dataclass(frozen=True)
class ExponentCheck:
    passed: bool
    constraints: tuple
    violations: tuple

    def __bool__(self):
        return self.passed


def _vertex_label(tree: FlagTree, vid: int) -> str:
    name = tree.vertices[vid].name
    return name if name else f"beta^{vid}"


def exponent_constraints(tree: FlagTree, exponents: ExponentTuple) -> list[Constraint]:
    """The cascade of lower bounds on vertex exponents, one per (vertex, j).

    Parameter ``j'`` is dropped from the bound at vertex ``v`` when its order
    there is a positive even integer; if every ``j' >= j`` is dropped, no
    constraint is produced.
    """
    out = []
    N = tree.parameters
    for vid, v in enumerate(tree.vertices):
        leaves = tuple(sorted(tree._leaves_under[vid]))
        for j in range(1, N + 1):
            gov, ex = [], []
            for jp in range(j, N + 1):
                (ex if is_positive_even_integer(v.orders[jp - 1]) else gov).append(jp)
            if not gov:
                continue
            bound = min(1 + Fraction(v.orders[jp - 1]) for jp in gov)
            lhs = sum((exponents.recip[l - 1][j - 1] for l in leaves), Fraction(0))
            out.append(Constraint(vid, _vertex_label(tree, vid), j, tuple(gov), tuple(ex),
                                  leaves, lhs, bound))
    return out


def _basic_violations(exponents: ExponentTuple, n: int, N: int) -> list[Violation]:
    out = []
    if exponents.n != n or exponents.parameters != N:
        out.append(Violation("shape", f"exponents are {exponents.n}x{exponents.parameters}, "
                                      f"operator needs {n}x{N}"))
        return out
    for l in range(1, n + 1):
        for j in range(1, N + 1):
            if exponents.recip[l - 1][j - 1] > 1:
                out.append(Violation("range", f"p_{l}^{j} = {format_exponent(exponents.p(l, j))} "
                                              f"lies outside [1, inf]", parameter=j))
    if not exponents.holder_holds:
        out.append(Violation("holder", "1/r != sum of 1/p_l"))
    return out


def check_exponents(tree: FlagTree, exponents: ExponentTuple) -> ExponentCheck:
    """Verdict on the exponent conditions of the flag Leibniz rule (d_j = 1)."""
    violations = _basic_violations(exponents, tree.n, tree.parameters)
    if violations and violations[0].kind == "shape":
        return ExponentCheck(False, (), tuple(violations))
    cons = exponent_constraints(tree, exponents)
    for c in cons:
        if not c.holds:
            violations.append(Violation(
                "vertex", f"vertex {c.vertex} ({c.label}), parameter {c.parameter}: "
                          f"{c.render()} fails ({c.lhs} >= {c.bound})",
                c.vertex, c.parameter, c.bound))
    return ExponentCheck(not violations, tuple(cons), tuple(violations))


def check_forest_exponents(forest: FlagForest, exponents: ExponentTuple) -> ExponentCheck:
    """Exponent conditions for a forest: every vertex of every tree bounds every r^j."""
    violations = _basic_violations(exponents, forest.n, forest.parameters)
    if violations and violations[0].kind == "shape":
        return ExponentCheck(False, (), tuple(violations))
    bounds = []
    for t in forest.trees:
        for v in t.vertices:
            if not is_positive_even_integer(v.orders[0]):
                bounds.append(1 + Fraction(v.orders[0]))
    cons = []
    if bounds:
        b = min(bounds)
        for j in range(1, forest.parameters + 1):
            lhs = exponents.r_recip[j - 1]
            cons.append(Constraint(0, "beta", j, tuple(range(1, forest.parameters + 1)), (),
                                   tuple(range(1, forest.n + 1)), lhs, b))
            if not lhs < b:
                violations.append(Violation("vertex", f"1/r^{j} = {lhs} >= {b}", 0, j, b))
    return ExponentCheck(not violations, tuple(cons), tuple(violations))


def check_symbol_exponents(n: int, exponents: ExponentTuple,
                           smoothing=None) -> ExponentCheck:
    """Exponent window for positive-order and smoothing symbol estimates.

    Requires ``1 < p_l^j < inf`` and ``1/n < r^j < inf``.  With ``smoothing``
    (one order ``s_j`` per parameter) the cascade ``1/r^j < 1 + s_{j'}`` over
    ``j' >= j`` is added.
    """
    N = exponents.parameters
    violations = _basic_violations(exponents, n, N)
    if violations and violations[0].kind == "shape":
        return ExponentCheck(False, (), tuple(violations))
    for l in range(1, n + 1):
        for j in range(1, N + 1):
            q = exponents.recip[l - 1][j - 1]
            if q == 0 or q == 1:
                violations.append(Violation("range", f"p_{l}^{j} must lie strictly between 1 and inf",
                                            parameter=j))
    cons = []
    for j in range(1, N + 1):
        q = exponents.r_recip[j - 1]
        if q == 0 or q >= n:
            violations.append(Violation("range", f"r^{j} must lie strictly between 1/{n} and inf",
                                        parameter=j))
        if smoothing is not None:
            s = [to_decimal(x) for x in smoothing]
            gov = [jp for jp in range(j, N + 1) if not is_positive_even_integer(s[jp - 1])]
            if gov:
                b = min(1 + Fraction(s[jp - 1]) for jp in gov)
                c = Constraint(0, "s", j, tuple(gov), (), tuple(range(1, n + 1)), q, b)
                cons.append(c)
                if not c.holds:
                    violations.append(Violation("vertex", f"1/r^{j} = {q} >= {b}", 0, j, b))
    return ExponentCheck(not violations, tuple(cons), tuple(violations))


# ---------------------------------------------------------------------------
# right-hand side terms

def _fmt_order(b: Decimal) -> str:
    return format(b.normalize(), "f")


@dataclass(frozen=True)
class LeafFactor:
    leaf: int
    orders: tuple
    exponents: tuple | None
    operator: str = HOMOGENEOUS

    def text(self) -> str:
        ds = ""
        if any(b != 0 for b in self.orders):
            ds = f"{self.operator}[" + ",".join(_fmt_order(b) for b in self.orders) + "] "
        if self.exponents is None:
            sub = f"p{self.leaf}"
        else:
            sub = "(" + ",".join(format_exponent(p) for p in self.exponents) + ")"
        return f"||{ds}f{self.leaf}||_{sub}"

    def latex(self) -> str:
        N = len(self.orders)
        ops = []
        for j, b in enumerate(self.orders, start=1):
            if b != 0:
                ops.append(f"{self.operator}^{{{_fmt_order(b)}}}" if N == 1
                           else f"{self.operator}_{{({j})}}^{{{_fmt_order(b)}}}")
        body = "".join(ops) + (" " if ops else "") + f"f_{{{self.leaf}}}"
        if self.exponents is None:
            space = f"L^{{p_{{{self.leaf}}}}}" if N == 1 else f"L^{{\\vec p_{{{self.leaf}}}}}"
        else:
            ps = [("\\infty" if p == INF else format_exponent(p)) for p in self.exponents]
            space = "L^{" + ",".join(ps) + "}"
        return f"\\|{body}\\|_{{{space}}}"


@dataclass(frozen=True)
class RHSTerm:
    dmap: DerivativeMap
    factors: tuple

    def text(self) -> str:
        return " * ".join(f.text() for f in self.factors)

    def latex(self) -> str:
        return " ".join(f.latex() for f in self.factors)


def _rhs_operator(obj) -> str:
    return INHOMOGENEOUS if obj.derivative_kind == "inhomogeneous" else HOMOGENEOUS


def rhs_terms(tree_or_forest, exponents: ExponentTuple | None = None) -> list[RHSTerm]:
    """One product of leaf norms per admissible derivative map."""
    op = _rhs_operator(tree_or_forest)
    n = tree_or_forest.n
    N = tree_or_forest.parameters
    out = []
    for dm in enumerate_delta_maps(tree_or_forest):
        factors = []
        for l in range(1, n + 1):
            ps = None if exponents is None else tuple(exponents.p(l, j) for j in range(1, N + 1))
            factors.append(LeafFactor(l, dm.orders_for(l), ps, op))
        out.append(RHSTerm(dm, tuple(factors)))
    return out


def depth_one_terms(n: int, orders: Iterable, exponents: ExponentTuple | None = None,
                    operator: str = HOMOGENEOUS) -> list[RHSTerm]:
    """RHS products for a single vertex above ``n`` leaves with arbitrary real orders.

    Unlike flag trees this accepts negative orders, as needed for smoothing
    estimates where each derivative may carry order ``s - nu``.
    """
    orders = tuple(to_decimal(b) for b in orders)
    N = len(orders)
    out = []
    for combo in itertools.product(range(1, n + 1), repeat=N):
        dm = DerivativeMap(tuple((l,) for l in combo), tuple((b,) for b in orders), n)
        factors = []
        for l in range(1, n + 1):
            ps = None if exponents is None else tuple(exponents.p(l, j) for j in range(1, N + 1))
            factors.append(LeafFactor(l, dm.orders_for(l), ps, operator))
        out.append(RHSTerm(dm, tuple(factors)))
    return out
