"""Relative localisation of a light-emitting robot from its surface reflection."""

__version__ = "0.1.0"
