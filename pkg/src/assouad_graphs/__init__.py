"""Assouad spectra of Hölder and Sobolev graphs: estimation, folding,
co-Hölder certificates and zigzag packings."""

__version__ = "0.1.0"
