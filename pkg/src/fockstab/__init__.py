"""Steady-state stabilization of a single-phonon Fock state.

Submodules: :mod:`fock` (truncated Fock spaces), :mod:`liouville`
(superoperators, steady states, time evolution), :mod:`models` (generic,
reduced and four-mode optomechanical Liouvillians), :mod:`wigner`
(phase-space distributions) and :mod:`cli`.
"""
from .fock import DensityMatrix, HilbertSpace, Operator, make_space
from .liouville import SolverError, Superoperator, evolve, steady_state

__version__ = "0.1.0"

__all__ = [
    "DensityMatrix",
    "HilbertSpace",
    "Operator",
    "make_space",
    "SolverError",
    "Superoperator",
    "evolve",
    "steady_state",
]
