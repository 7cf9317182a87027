"""Mixed Dirichlet-Neumann eigenfunctions on planar domains and their critical points."""

__version__ = "0.1.0"
