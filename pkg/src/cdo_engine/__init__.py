"""Exact symbolic engine for chiral differential operators on polynomial super-charts."""

__version__ = "0.1.0"
