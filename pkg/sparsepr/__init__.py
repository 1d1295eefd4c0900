"""
sparsepr - Sparse phase retrieval with Hadamard Wirtinger flow.

This package recovers a k-sparse real signal from squared Gaussian
measurements y_j = (a_j . x)^2, compares against the SPARTA baseline, and runs
the Monte Carlo experiments used to measure success rates.
"""

__version__ = "0.1.0"
