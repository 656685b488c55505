"""Composite classical and quantum channel discrimination toolkit."""

__version__ = "0.1.0"
