"""Exact simulation of passive impersonation attacks on quantum protocols over classical channels."""
from __future__ import annotations

from .attack import (
    AttackConfig,
    AttackOutcome,
    CloningOutcome,
    ExtrapolationInstance,
    HybridRung,
    budget,
    cloning_adversary,
    distance_bound,
    extrapolation_overlap,
    hybrid_ladder,
    impersonate,
    posterior,
)
from .cq import CqState, Transcript
from .protocol import ProtocolSpec, StepTrace, init, run, step
from .qcore import DensityOperator, Isometry, PureState, Register, RegisterLayout

__version__ = "0.1.0"

__all__ = [
    "AttackConfig", "AttackOutcome", "CloningOutcome", "CqState", "DensityOperator",
    "ExtrapolationInstance", "HybridRung", "Isometry", "ProtocolSpec", "PureState", "Register",
    "RegisterLayout", "StepTrace", "Transcript", "budget", "cloning_adversary", "distance_bound",
    "extrapolation_overlap", "hybrid_ladder", "impersonate", "init", "posterior", "run", "step",
]
