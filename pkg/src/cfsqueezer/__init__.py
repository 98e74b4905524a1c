"""Frequency-domain analysis of coherent feedback squeezers."""
__version__ = "0.1.0"
