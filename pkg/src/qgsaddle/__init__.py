"""Pseudo-spectral laboratory for active scalar fronts.

Simulates SQG / 2D Euler / 1D model equations on the periodic box, detects
and tracks hyperbolic saddles of the scalar's level-set topology, measures
their opening angle, and cross-checks the kernel estimates and growth laws
that govern front formation.
"""

from .grid import (
    DDX1,
    DDX2,
    DEALIAS,
    HILBERT,
    Field1D,
    Field2D,
    Grid2D,
    Symbol,
    apply_symbol,
    frac_laplacian,
    inv_frac_laplacian,
    perp_grad,
    transform,
)

__all__ = [
    "DDX1",
    "DDX2",
    "DEALIAS",
    "HILBERT",
    "Field1D",
    "Field2D",
    "Grid2D",
    "Symbol",
    "apply_symbol",
    "frac_laplacian",
    "inv_frac_laplacian",
    "perp_grad",
    "transform",
]
