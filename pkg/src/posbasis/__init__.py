"""Positive basic sequences and positive Schauder frames, with numerical certificates."""

__version__ = "0.1.0"
