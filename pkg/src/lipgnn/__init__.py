"""Graph neural networks with constrained filter frequency responses."""

__version__ = "0.1.0"
