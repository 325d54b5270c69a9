"""Numerical toolkit for geodesically equivalent pseudo-Riemannian metrics.

Computes the pair tensor of two metrics, checks the first-order
compatibility equation characterizing shared unparameterized geodesics,
executes the splitting and gluing constructions and operator-function
rescalings pointwise, generates normal-form test pairs, and verifies all
of it against independent oracles (Nijenhuis torsion, local-product
parallelism, geodesic integration).
"""

from . import equiv, exprdsl, fields, oracle, smallmat
from .errors import GeoequivError

__all__ = ["equiv", "exprdsl", "fields", "oracle", "smallmat", "GeoequivError"]
__version__ = "0.1.0"
