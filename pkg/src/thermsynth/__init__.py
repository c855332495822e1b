"""Procedural synthetic thermal aerial image generation."""

__version__ = "0.1.0"
