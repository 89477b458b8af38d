"""
Model: MLP feature extractor + proxy classifier with analytic gradients.
"""

from .checkpoint import load_params, save_params
from .core import (
    DenseLayer,
    ForwardTrace,
    GradientBuffer,
    ModelParams,
    ShapeError,
    StaleTraceError,
    backward,
    classify,
    forward_extract,
    init_params,
    log_softmax,
    logsumexp,
    predict,
    sgd_step,
    softmax,
)
from .gradcheck import GradCheckReport, grad_check

__all__ = [
    "DenseLayer",
    "ForwardTrace",
    "GradCheckReport",
    "GradientBuffer",
    "ModelParams",
    "ShapeError",
    "StaleTraceError",
    "backward",
    "classify",
    "forward_extract",
    "grad_check",
    "init_params",
    "load_params",
    "log_softmax",
    "logsumexp",
    "predict",
    "save_params",
    "sgd_step",
    "softmax",
]
