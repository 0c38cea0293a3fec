"""Channel calculus and quantum-autoencoder simulation."""

__version__ = "0.1.0"
