"""Vinberg algebras and homogeneous cones over finite posets, with the
Wishart family on those cones and Monte-Carlo checks of its characterization."""

__version__ = "0.1.0"

from .algebra import StructuredMatrix, verify_axioms
from .cone import ConePoint, DualPoint, NotInCone, NotInDualCone, decompose
from .poset import ConditionFError, Poset, parse_poset
from .wishart import InvalidMultiplier, Multiplier, WishartModel

__all__ = [
    "ConditionFError", "ConePoint", "DualPoint", "InvalidMultiplier", "Multiplier",
    "NotInCone", "NotInDualCone", "Poset", "StructuredMatrix", "WishartModel",
    "decompose", "parse_poset", "verify_axioms",
]
