"""Atomic measures on the circle with Fourier coefficients tending to 1 along a sequence."""

__version__ = "0.1.0"
