"""CLI module for qfvae."""

from qfvae.cli.main import app

__all__ = ["app"]
