"""Inverse-model neuro-control workbench for a simulated DC servo."""

__version__ = "0.1.0"
