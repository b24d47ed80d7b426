"""Front tracking and boundary control for linearly degenerate hyperbolic systems."""
__version__ = "0.1.0"
