"""Hierarchical label-path classification for multi-document proposals."""

__version__ = "0.1.0"
