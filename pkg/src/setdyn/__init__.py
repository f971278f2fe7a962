"""Computational tools for set-valued dynamical systems on discretized spaces."""

__version__ = "0.1.0"
