"""Demand-aware inter-satellite-link topology lab for LEO shells."""
from .kernels import BACKEND

__version__ = "0.1.0"

__all__ = ["BACKEND", "__version__"]
