"""Stochastic loss reserving for dependent lines with continuum GMM estimation."""

__version__ = "0.1.0"
