"""Pulse-level Lindblad simulation of a small qubit processor, cluster-expansion
decomposition of its noise generators, gain-tuned approximate channels, and a
branching [[2,0,2]]-code simulation quantifying honesty and accuracy."""

from ._backend import BACKEND, USE_NUMBA

__version__ = "0.1.0"

__all__ = ["BACKEND", "USE_NUMBA", "__version__"]
