"""Deep-limit numerics for neural-network Gaussian fields on the sphere."""

__version__ = "0.1.0"
