"""Numerical laboratory for the renormalized stochastic Abelian-Higgs flow on the 2-torus."""

__version__ = "0.1.0"
