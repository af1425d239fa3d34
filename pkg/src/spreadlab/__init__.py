"""Sparse signed biregular matrices: sampling, spread attacks, RIP certificates and spectra."""
__version__ = "0.1.0"
