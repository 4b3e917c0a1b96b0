"""Quadrature noise of the vacuum polarisation channel after propagation
through a cold, Zeeman-degenerate 87Rb sample, plus homodyne trace reduction."""

__version__ = "0.1.0"
