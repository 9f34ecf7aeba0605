"""Recurrence structure and sequence-entropy estimates for piecewise-linear
maps on finite metric trees."""

__version__ = "0.1.0"
