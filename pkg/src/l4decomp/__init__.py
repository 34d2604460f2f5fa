"""Unique decomposition of a low-rank matrix ``Y = A X`` with sparse ``X``.

The columns of ``A`` are recovered one at a time by maximizing the l4 norm of
``Y^T q`` over unit vectors ``q`` after whitening ``Y``, with deflation
between columns.  See the README for a tour of the modules.
"""
from .model import (
    DimensionError,
    MatrixKind,
    MixingMatrix,
    ProblemDims,
    SignedPermutation,
    SparseCoefficients,
    SparsityModel,
    apply_signed_permutation,
    generate_A,
    generate_X,
    synthesize,
)
from .baseline_adm import adm_recover_all
from .experiments import make_instance
from .metrics import match_signed_permutation, recovery_report
from .objective import Objective, ObjectiveKind
from .pipeline import recover_all
from .precond import IllConditionedError, invert_precondition, precondition
from .solver import SolverOptions, SolveTrace, Status, init_q0, solve

__version__ = "0.1.0"

__all__ = [
    "DimensionError",
    "IllConditionedError",
    "MatrixKind",
    "MixingMatrix",
    "Objective",
    "ObjectiveKind",
    "ProblemDims",
    "SignedPermutation",
    "SolveTrace",
    "SolverOptions",
    "SparseCoefficients",
    "SparsityModel",
    "Status",
    "adm_recover_all",
    "apply_signed_permutation",
    "generate_A",
    "generate_X",
    "init_q0",
    "invert_precondition",
    "make_instance",
    "match_signed_permutation",
    "precondition",
    "recover_all",
    "recovery_report",
    "solve",
    "synthesize",
]
