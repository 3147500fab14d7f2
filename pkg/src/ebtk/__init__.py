"""Toolkit for deciding, witnessing and refuting the entanglement-breaking property of channels."""

from .channels import (
    Channel,
    Ensemble,
    HolevoForm,
    KrausForm,
    Povm,
    apply,
    channel_from_choi,
    channel_from_kraus,
    holevo_to_channel,
    qc_channel,
)
from .config import DEFAULT_RUN, RunConfig, SolverConfig
from .criteria import EbReport, EbVerdict, eb_report
from .errors import EbtkError
from .feasibility import FeasibilityOutcome, Verdict

__version__ = "0.1.0"

__all__ = [
    "Channel",
    "DEFAULT_RUN",
    "EbReport",
    "EbVerdict",
    "EbtkError",
    "Ensemble",
    "FeasibilityOutcome",
    "HolevoForm",
    "KrausForm",
    "Povm",
    "RunConfig",
    "SolverConfig",
    "Verdict",
    "apply",
    "channel_from_choi",
    "channel_from_kraus",
    "eb_report",
    "holevo_to_channel",
    "qc_channel",
]
