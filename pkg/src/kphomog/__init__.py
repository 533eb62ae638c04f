"""Homogeneity evaluation of keyphrase prediction systems."""

__version__ = "0.1.0"
