"""Numerical laboratory for singular semi-flat Calabi-Yau metrics on the 2-sphere.

A cubic differential with simple poles on CP^1 determines (through Titeica's
equation) an affine metric whose parabolic affine sphere carries an affine
flat structure with parabolic holonomy around each pole.  The subpackages
construct the metric, develop the structure and measure its invariants.
"""

from semiflat.cubic_diff import CanonicalChart, Pole, RationalCubicDifferential

__all__ = ["RationalCubicDifferential", "Pole", "CanonicalChart"]
__version__ = "0.1.0"
