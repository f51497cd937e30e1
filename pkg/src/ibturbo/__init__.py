"""Turbo equalization with information-bottleneck lookup-table equalizers."""

__version__ = "0.1.0"
