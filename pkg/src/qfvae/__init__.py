"""QFVAE - Quantized fine-grained prosody VAE experiments."""

__version__ = "0.1.0"
