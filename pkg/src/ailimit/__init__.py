"""Anti-integrable states of 3D quadratic diffeomorphisms and their continuation."""

from .relation import Branch, RelationCoeffs

__all__ = ["Branch", "RelationCoeffs"]
