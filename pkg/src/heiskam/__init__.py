"""Numerical toolkit for smooth rigidity of commuting translations on the
Heisenberg nilmanifold: torus and Schrodinger cohomology solvers, Diophantine
certification, nilpotent-group dynamics and a tame KAM iteration."""

from ._core import BACKEND

__version__ = "0.1.0"
__all__ = ["BACKEND", "__version__"]
