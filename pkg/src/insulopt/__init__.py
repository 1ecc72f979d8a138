"""Optimal distribution of a thin insulating layer in the Robin limit.

P1 finite elements on triangulated planar domains, alternating minimisation
of the reduced energy and of the auxiliary eigenvalue functional, and
analysis helpers for symmetry breaking and concentration.
"""
__version__ = "0.1.0"
