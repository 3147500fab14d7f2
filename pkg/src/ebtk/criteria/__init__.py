"""Tests, witnesses and refutations for the entanglement-breaking property."""

from .joint import (
    JointProblem,
    SymmetricJointFeasibility,
    explicit_joint_problem,
    joint_from_holevo,
    marginalize_joint,
    n_joint_feasibility,
    symmetrize_joint,
    verify_joint_witness,
)
from .relations import (
    QcFactorization,
    broadcast_feasibility,
    broadcast_residual,
    classical_copy_broadcast,
    qc_factorization,
    qc_from_holevo,
    randomization_order,
)
from .report import EbReport, EbVerdict, eb_report
from .separable import (
    DecompositionResult,
    PptResult,
    decompose_state,
    factored_holevo,
    holevo_from_decomposition,
    holevo_reconstruction_error,
    ppt_check,
    separable_decomposition,
)

__all__ = [
    "DecompositionResult",
    "EbReport",
    "EbVerdict",
    "JointProblem",
    "PptResult",
    "QcFactorization",
    "SymmetricJointFeasibility",
    "broadcast_feasibility",
    "broadcast_residual",
    "classical_copy_broadcast",
    "decompose_state",
    "eb_report",
    "explicit_joint_problem",
    "factored_holevo",
    "holevo_from_decomposition",
    "holevo_reconstruction_error",
    "joint_from_holevo",
    "marginalize_joint",
    "n_joint_feasibility",
    "ppt_check",
    "qc_factorization",
    "qc_from_holevo",
    "randomization_order",
    "separable_decomposition",
    "symmetrize_joint",
    "verify_joint_witness",
]
