"""Medication term and relation extraction from clinical notes."""

__version__ = "0.1.0"
