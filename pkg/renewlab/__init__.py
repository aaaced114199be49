"""
renewlab - Operator Renewal Numerics for Intermittent Maps

This package implements a desk-scale laboratory for operator renewal theory:
the LSV interval map family and its invertible skew-product extensions, Ulam
discretizations of the induced transfer operator, renewal sequences, Monte Carlo
correlation estimates and anisotropic norm audits.
"""

__version__ = "0.1.0"
