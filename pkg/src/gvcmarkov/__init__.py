"""Absorbing Markov chain analysis of world input-output tables."""
__version__ = "0.1.0"
