"""Integrity-driven landmark selection for GPS-vision navigation."""

__version__ = "0.1.0"
