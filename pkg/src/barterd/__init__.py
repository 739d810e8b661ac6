"""Barter-credit marketplace engine and simulator for pooled cloud capacity."""

__version__ = "0.1.0"
