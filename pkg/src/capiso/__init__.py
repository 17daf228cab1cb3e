"""Numerical checks for weighted capillary isoperimetric and Sobolev inequalities."""

__version__ = "0.1.0"
