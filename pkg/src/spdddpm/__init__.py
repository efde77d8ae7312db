"""Denoising diffusion models on the manifold of symmetric positive definite matrices."""
from . import data, diffusion, errors, kernels, prob, spd, spdnet, verify
from .diffusion import (
    NoiseSchedule,
    SamplerConfig,
    TrainConfig,
    build_schedule,
    forward_jump,
    forward_step,
    load_checkpoint,
    predict_conditional,
    reverse_step,
    sample_conditional,
    sample_unconditional,
    save_checkpoint,
    train_conditional,
    train_unconditional,
)
from .prob import (
    EigenSamplerConfig,
    FrechetConfig,
    RiemannianGaussian,
    frechet_mean,
    normalizer_zeta,
    sample,
    sample_standard,
)
from .spd import (
    dist_affine,
    dist_frobenius,
    group_action,
    mat_exp,
    mat_log,
    mat_pow,
    odot,
    ominus,
    oplus,
    validate_spd,
)
from .spdnet import SPDUNet, UNetSpec

__version__ = "0.1.0"
