"""FCDS Packing - Distributed fractional connected dominating set packing in a simulated CONGEST network."""

__version__ = "0.1.0"
