"""Entry point for python -m qfvae."""

from qfvae.cli.main import app

if __name__ == "__main__":
    app()
