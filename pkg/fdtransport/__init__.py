"""fdtransport - finite difference solvers for linear transport equations"""

__version__ = "0.1.0"
