from src.core.activation import (
    ShapeParams,
    gamma,
    gamma_dn,
    gamma_ds,
    gamma_dx,
    gamma_parts,
    gamma_vec,
)
from src.core.linalg import (
    RngStream,
    block_rotation_orthogonal,
    init_gaussian,
    init_orthogonal,
    matmul,
    qr_pos,
    spectral_norm,
)
from src.core.optim import (
    AdamState,
    PlateauScheduler,
    adam_step,
    clip_grad_norm,
    plateau_update,
    trainable_names,
)
from src.core.rnn import (
    ForwardTrace,
    Gradients,
    RnnModel,
    backward,
    forward,
    init_model,
    jacobian_at,
    loss_and_grads,
)

__all__ = [
    "ShapeParams",
    "gamma",
    "gamma_dn",
    "gamma_ds",
    "gamma_dx",
    "gamma_parts",
    "gamma_vec",
    "RngStream",
    "block_rotation_orthogonal",
    "init_gaussian",
    "init_orthogonal",
    "matmul",
    "qr_pos",
    "spectral_norm",
    "AdamState",
    "PlateauScheduler",
    "adam_step",
    "clip_grad_norm",
    "plateau_update",
    "trainable_names",
    "ForwardTrace",
    "Gradients",
    "RnnModel",
    "backward",
    "forward",
    "init_model",
    "jacobian_at",
    "loss_and_grads",
]
