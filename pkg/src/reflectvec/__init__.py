"""Word embeddings with a reflection-tied context matrix, PMI spectra and Gaussian-model checks."""

__version__ = "0.1.0"
