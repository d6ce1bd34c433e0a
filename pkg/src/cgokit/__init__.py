"""Desk-scale numerics for complex geometric optics solutions and potential recovery."""

__version__ = "0.1.0"
