"""Twisted states in phase-oscillator networks on ring graphs.

Tools to build nearest-neighbor ring graphons and their deterministic or
random realizations, evaluate the closed-form linear spectrum of twisted
states, compute the normal-form constants governing their bifurcations,
integrate the finite-n oscillator network with an O(n) right-hand side,
and post-process trajectories (twisted-state fits, first-Fourier-mode
modulation estimates, resolution-convergence studies).
"""

__version__ = "1.0.0"

from . import analysis, bifurcation, circular, dynamics, graphs, spectrum

__all__ = [
    "__version__",
    "analysis",
    "bifurcation",
    "circular",
    "dynamics",
    "graphs",
    "spectrum",
]
