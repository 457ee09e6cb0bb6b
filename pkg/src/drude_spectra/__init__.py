"""Certified spectral data for the lossy Drude-Lorentz waveguide model."""

__version__ = "0.1.0"
