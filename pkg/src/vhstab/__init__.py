"""Numerical laboratory for a three-variable Volterra-Hammerstein integral equation."""
from .certify import ContractionCertificate, certify, estimate_lipschitz, hur_constant
from .cubature import KernelSpec, fredholm_field, fredholm_truncated, refine_estimate, volterra_prefix
from .dsl import Expression, evaluate, parse, print_canonical
from .grid import Domain, Field3D, axpy, bielecki_norm, sample, sup_diff
from .operator import apply_A, residual
from .problem import LipschitzData, ProblemInstance
from .solver import SolveReport, a_priori_bound, solve
from .stability import PerturbationSpec, StabilityReport, check_hur, derive_phi, gronwall_check, make_perturbed

__version__ = "0.1.0"
