"""Propaganda detection toolkit: span identification over precomputed
token embeddings and hybrid technique classification."""

__version__ = "0.1.0"
