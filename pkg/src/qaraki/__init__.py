"""q-Gaussian and q-Araki-Woods algebras on truncated q-Fock spaces."""

__version__ = "0.1.0"
