"""Sparse Sobolev graph neural networks on a hand-written CSR core."""

__version__ = "0.1.0"
