"""Verification toolkit for lattice-regularized massive QED in two dimensions."""
from .lattice import LatticeParams, rescale

__version__ = "0.1.0"
__all__ = ["LatticeParams", "rescale", "__version__"]
