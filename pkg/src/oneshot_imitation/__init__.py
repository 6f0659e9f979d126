"""Desk-scale one-shot visual imitation workbench."""

__version__ = "0.1.0"
