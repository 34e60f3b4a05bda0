"""Tripartite quantum correlations in the transverse-field XY chain.

Analytic three-spin reduced density matrices for infinite and finite odd
chains, four tripartite correlation measures (including an SDP-backed PPT
exact entanglement cost), an exact-diagonalization oracle, and the sweep,
fit, and detection machinery for critical scaling, factorization, and
bound-entanglement analysis.
"""

__version__ = "0.1.0"

from . import analysis, edsim, linalg, measures, sdp, xychain

__all__ = ["analysis", "edsim", "linalg", "measures", "sdp", "xychain", "__version__"]
