"""Weak Galerkin Stokes coupled to BDM mixed Darcy flow through a mortar interface."""
from .errors import (
    BudgetExceeded,
    DegenerateElement,
    IncompleteCase,
    InvalidCoefficient,
    InvalidDomain,
    InvalidProfile,
    SingularSystem,
    UnsupportedDegree,
    WGMFEMError,
)
from .mesh import DomainSpec, EdgeTag, Mesh, Region, build_mesh, refine
from .mfem_darcy import BDMSpace, interpolate_hdiv
from .system import CaseCoefficients, ProblemData, apply_boundary_data, assemble, solve
from .verification import case_one, case_two, convergence_study, error_norms
from .wg_stokes import DegreeProfile, WGStokesSpace, stokes_energy_norm

__version__ = "0.1.0"
