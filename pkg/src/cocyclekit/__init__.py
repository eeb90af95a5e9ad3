"""cocyclekit: desk-scale cocycle calculus on S^1 and T^2.

Truncated-Fourier differential forms, diffeomorphism and linear-group paths
with logarithmic derivatives, Lie algebra 2-cocycles with Chevalley-Eilenberg
verification, prequantization charts with holonomy, flux 1-cocycles, and
abelian group extensions built from local primitives.
"""

from .config import TOL, RES, Tolerances, Resolution

__version__ = "0.1.0"
