"""Exact first-passage percolation lab on finite boxes of Z^d."""

__version__ = "0.1.0"
