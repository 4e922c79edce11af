"""Flag Leibniz rules as executable objects on periodic grids.

Submodules: ``flagtree`` (trees, derivative maps, exponent checks),
``spectral`` (grids, multipliers, Littlewood-Paley projections), ``norms``
(mixed Lebesgue/Besov norms), ``flagop`` (operator evaluation), ``decompose``
(paraproducts, commutators, symbol expansions, cone pieces), ``verify``
(inequality harnesses) and ``cli``.
"""
from .flagtree import (DerivativeMap, ExponentTuple, FlagForest, FlagTree, Leaf, Vertex,
                       check_exponents, enumerate_delta_maps, format_tree, rhs_terms)
from .spectral import GridFunction, GridSpec

__version__ = "0.1.0"

__all__ = [
    "DerivativeMap", "ExponentTuple", "FlagForest", "FlagTree", "Leaf", "Vertex",
    "check_exponents", "enumerate_delta_maps", "format_tree", "rhs_terms",
    "GridFunction", "GridSpec",
]
