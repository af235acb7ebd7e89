"""Succinct 2D orthogonal range reporting over ball-inheritance trees."""

__version__ = "0.1.0"
