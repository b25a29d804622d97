"""Dirichlet p-Laplacian eigenvalues on discs, sectors and balls."""
__version__ = "0.1.0"

from ._accel import backend
from .fem import EigenResult, NodalField, solve_first_eig, solve_linear_eigs
from .geometry import DomainSpec, TriangleMesh, make_disc, make_sector, make_wedge
from .radial import certify_roots, check_gap, integrate_radial, mu_k, radial_roots
from .symmetry import assemble_psi_k, count_nodal_domains

__all__ = [
    "__version__", "backend",
    "DomainSpec", "TriangleMesh", "make_disc", "make_sector", "make_wedge",
    "integrate_radial", "radial_roots", "certify_roots", "check_gap", "mu_k",
    "NodalField", "EigenResult", "solve_first_eig", "solve_linear_eigs",
    "assemble_psi_k", "count_nodal_domains",
]
