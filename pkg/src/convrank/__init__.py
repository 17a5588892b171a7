"""Siamese preference learning for argument convincingness."""

__version__ = "0.1.0"
