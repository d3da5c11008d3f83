"""Drifting parties in the biased bounded-confidence opinion model."""

__version__ = "0.1.0"
