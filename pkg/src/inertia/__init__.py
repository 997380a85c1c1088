"""Inertial-manifold reduction of the one-dimensional viscous Burgers equation."""

__version__ = "0.1.0"
