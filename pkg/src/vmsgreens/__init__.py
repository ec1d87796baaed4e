"""Algebraic variational multiscale method with fine-scale Greens' functions.

Spectral-element (GLL) discretizations of steady advection-diffusion in 1D
(direct and mixed) and 2D (mixed), the discrete fine-scale Greens' function
of the optimal projector, and the resulting VMS solver.
"""

from .analysis import (
    ConvergenceRecord,
    ErrorReport,
    ExactBundle,
    convergence_sweep,
    error_direct,
    error_mixed,
    exact_1d,
    exact_2d,
    orthogonality_table,
)
from .assembly import OperatorMatrix, SingularMatrixError
from .greens import ClassicGreens, FineScaleGreens, classic_greens, fine_scale_greens, kernel_eval
from .solver import (
    ProblemSpec,
    SolverError,
    SuyashGreens,
    VmsSolution,
    build_suyash_greens,
    galerkin_solve,
    optimal_projection,
    reconstruct_fine_scales,
    vms_solve,
)
from .spaces import FunctionSpace, Mesh, SpaceKind, build_space, embedding

__version__ = "0.1.0"

__all__ = [
    "ClassicGreens",
    "ConvergenceRecord",
    "ErrorReport",
    "ExactBundle",
    "FineScaleGreens",
    "FunctionSpace",
    "Mesh",
    "OperatorMatrix",
    "ProblemSpec",
    "SingularMatrixError",
    "SolverError",
    "SpaceKind",
    "SuyashGreens",
    "VmsSolution",
    "build_space",
    "build_suyash_greens",
    "classic_greens",
    "convergence_sweep",
    "embedding",
    "error_direct",
    "error_mixed",
    "exact_1d",
    "exact_2d",
    "fine_scale_greens",
    "galerkin_solve",
    "kernel_eval",
    "optimal_projection",
    "orthogonality_table",
    "reconstruct_fine_scales",
    "vms_solve",
]
