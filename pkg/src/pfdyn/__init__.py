"""Differential iterations of polynomial vector fields and their invariant densities."""
from .difiter import Box, DifferentialIteration, orbit, step
from .polymap import PolyMap, evaluate, jacobian

__version__ = "0.1.0"

__all__ = ["Box", "DifferentialIteration", "PolyMap", "evaluate", "jacobian", "orbit", "step",
           "__version__"]
