"""Lightweight single-image super resolution on a self-contained autograd core."""

from .complexity import ComplexityReport, complexity_report, count_macs, count_params
from .degrade import DegradationSpec, bicubic_kernel, degrade, gaussian_kernel2d, resize_bicubic
from .metrics import EvalReport, evaluate, psnr, ssim
from .model import (
    ConnectionToggles,
    ForwardTrace,
    Model,
    ModelConfig,
    PathToggles,
    WeightStore,
    arb_forward,
    build_model,
    mprnet_forward,
    rcb_forward,
    residual_module_forward,
    tfam_forward,
)
from .tensor import GradientTape, Tensor, backward, l1_loss
from .training import OptimizerState, TrainConfig, adam_step, fit, lr_at
from .weights_io import load_weights, save_weights

__version__ = "0.1.0"
