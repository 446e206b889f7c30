"""Numerics for mesoscopic linear statistics of modified GUE/CUE ensembles."""
from ._accel import AVAILABLE as COMPILED_CORE

__version__ = "0.1.0"

__all__ = ["COMPILED_CORE", "__version__"]
