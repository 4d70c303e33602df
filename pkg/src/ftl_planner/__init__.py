"""Sampling-based follow-the-leader planning for continuum robots on a mobile SE(3) base."""

__version__ = "0.1.0"
