"""Accelerated information gradient flows for particle-based sampling."""

from aigflow.core import (
    ConfigurationError,
    Ensemble,
    NumericalFailure,
    RngStream,
    Schedule,
    alpha,
    init_ensemble,
)
from aigflow.kernels import GaussianKernel, gram, grad_gram, mmd
from aigflow.score import (
    BandwidthState,
    bm_bandwidth,
    gaussian_score,
    kde_score,
    med_bandwidth,
)
from aigflow.flows import FlowKind, StepRecord, run_flow
from aigflow.targets import (
    LogisticDataset,
    TargetModel,
    bimodal_ring_target,
    blr_target,
    gaussian_target,
    reference_samples,
)

__version__ = "0.1.0"

__all__ = [
    "BandwidthState",
    "ConfigurationError",
    "Ensemble",
    "FlowKind",
    "GaussianKernel",
    "LogisticDataset",
    "NumericalFailure",
    "RngStream",
    "Schedule",
    "StepRecord",
    "TargetModel",
    "alpha",
    "bimodal_ring_target",
    "blr_target",
    "bm_bandwidth",
    "gaussian_score",
    "gaussian_target",
    "gram",
    "grad_gram",
    "init_ensemble",
    "kde_score",
    "med_bandwidth",
    "mmd",
    "reference_samples",
    "run_flow",
]
