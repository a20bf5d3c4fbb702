"""Fully dynamic-rounding online bin packing with bounded migration, in exact arithmetic."""

__version__ = "0.1.0"
