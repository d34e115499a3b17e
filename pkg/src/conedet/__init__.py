"""Spectral determinants of Laplacians on flat surfaces with conical points."""
from conedet.errors import ConedetError

__version__ = "0.1.0"

__all__ = ["ConedetError", "__version__"]
