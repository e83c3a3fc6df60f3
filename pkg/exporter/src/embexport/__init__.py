"""One-shot exporter: run an encoder over a contexts file and write
PDEMB1 embeddings plus a token-alignment sidecar."""

__version__ = "0.1.0"
