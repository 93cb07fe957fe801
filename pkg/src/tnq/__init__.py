"""Tensor-network toolkit for simulating quantum circuits, annealing, open systems and magic.

Submodules are imported explicitly, e.g. ``from tnq import mps``.
"""

__version__ = "0.1.0"
