"""Lyapunov spectra of random matrix products and certified bounds on them."""

__version__ = "0.1.0"
