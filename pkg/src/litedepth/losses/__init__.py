from .combine import TERM_NAMES, LossReport, LossWeights, depth_loss, total_loss
from .distill import affinity_map, distill_level, distill_loss
from .fit import FitDivergedError, FitStep, FitTrace, fit_toy, toy_problem
from .terms import (
    LossError,
    RobustParams,
    SilogParams,
    gradient_masks,
    grad_loss,
    robust_loss,
    silog_loss,
)
from .vnl import (
    CameraIntrinsics,
    VnlSamplerConfig,
    backproject,
    sample_triplets,
    vnl_from_triplets,
    vnl_loss,
)

__all__ = [
    "TERM_NAMES",
    "CameraIntrinsics",
    "FitDivergedError",
    "FitStep",
    "FitTrace",
    "LossError",
    "LossReport",
    "LossWeights",
    "RobustParams",
    "SilogParams",
    "VnlSamplerConfig",
    "affinity_map",
    "backproject",
    "depth_loss",
    "distill_level",
    "distill_loss",
    "fit_toy",
    "toy_problem",
    "grad_loss",
    "gradient_masks",
    "robust_loss",
    "sample_triplets",
    "silog_loss",
    "total_loss",
    "vnl_from_triplets",
    "vnl_loss",
]
