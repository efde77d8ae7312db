"""SPD U-Net with a reverse-mode tape and spectral-function gradients."""
from .functional import (
    REEIG_FLOOR,
    bimap_backward,
    bimap_forward,
    embed_identity,
    reeig_backward,
    reeig_forward,
    sinusoidal_embedding,
    spectral_backward,
    spectral_forward,
)
from .losses import affine_sq_distance, frobenius_sq_distance
from .optim import AdamState, adam_step, cosine_lr
from .tape import Node, Tape
from .unet import SPDUNet, UNetSpec, init_params

__all__ = [
    "REEIG_FLOOR",
    "AdamState",
    "Node",
    "SPDUNet",
    "Tape",
    "UNetSpec",
    "adam_step",
    "affine_sq_distance",
    "bimap_backward",
    "bimap_forward",
    "cosine_lr",
    "embed_identity",
    "frobenius_sq_distance",
    "init_params",
    "reeig_backward",
    "reeig_forward",
    "sinusoidal_embedding",
    "spectral_backward",
    "spectral_forward",
]
