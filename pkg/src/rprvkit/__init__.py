"""Robust predictive runtime verification for STL and STREL specifications."""
__version__ = "0.1.0"
