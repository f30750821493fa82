"""Bayesian detection of star-shaped boundaries in noisy images."""

__version__ = "0.1.0"
