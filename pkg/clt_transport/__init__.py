"""
One-dimensional optimal transport and CLT bounds.

Lattice laws and their Gaussian companions, exact 1-D transport distances
through the quantile coupling, cumulant class certificates, the Esscher
transform, and numerical checks of the inequalities that drive Gaussian
approximation rates.
"""

__version__ = "0.1.0"
