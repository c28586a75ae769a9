"""Traveling waves for a fractional KdV equation with Bessel-potential dispersion.

Periodic waves are computed by Newton continuation in the relative wave
height; solitary waves are obtained as large-period limits followed by a
Galilean shift.
"""

from .errors import (
    BranchStalled,
    ConstraintInfeasible,
    FKdVError,
    InsufficientResolution,
    InvalidSpeed,
    MethodUnavailable,
    NewtonDiverged,
    NoConvergenceInP,
    NonConvergedQuadrature,
    SingularEvaluation,
    TailNotSettled,
)
from .kernel import KernelMethod, SymbolSpec, eval_kernel, eval_kernel_periodized, kernel_mass
from .operators import GridFunction, Parity, PeriodicGrid, apply_lambda, convolve_direct
from .solver import SolverOptions, WaveSolution, continue_branch, solve_at_lambda
from .solitary import SolitaryWave, compute_decay_rate, construct_solitary, galilean_transform

__version__ = "0.1.0"
