"""Spectral laboratory for Strichartz estimates of the free Schrödinger equation."""

__version__ = "0.1.0"
