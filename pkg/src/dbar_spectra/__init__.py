"""Spectra of the Laplacian with the d-bar Robin boundary condition.

Submodules
----------
special    Bessel functions of integer order and their zeros
analytic   exact eigenvalue branches on disks and annuli
mesh       domains, triangulations, mesh files
fem        P1 (optionally holomorphically enriched) matrices
spectra    eigensolver, eigenvalue curves, curve checks
holo       Bergman projection, Cauchy integral, Hardy-Steklov levels
resolvent  resolvent-difference norms
cli        command-line interface
"""
from .analytic import AnnulusSpec, DiskMode, disk_branch_eigenvalue, disk_ordered_spectrum
from .fem import AssembledForms, assemble, operator_matrix
from .mesh import DomainSpec, Mesh, read_mesh, refine, triangulate, write_mesh
from .results import Spectrum
from .spectra import EigenCurve, solve_operator, solve_spectrum, sweep_curves

__version__ = "0.1.0"

__all__ = [
    "AnnulusSpec", "DiskMode", "disk_branch_eigenvalue", "disk_ordered_spectrum",
    "AssembledForms", "assemble", "operator_matrix",
    "DomainSpec", "Mesh", "read_mesh", "refine", "triangulate", "write_mesh",
    "Spectrum", "EigenCurve", "solve_operator", "solve_spectrum", "sweep_curves",
]
