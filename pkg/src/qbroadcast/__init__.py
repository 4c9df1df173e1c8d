"""Numerical toolkit for multipartite convex splitting and broadcast channel simulation."""

__version__ = "0.1.0"
