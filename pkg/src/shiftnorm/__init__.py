"""Directional shift semigroups on convex domains and the norms they induce."""

__version__ = "0.1.0"
