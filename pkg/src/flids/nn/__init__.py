"""Detection models trained from scratch on the window features."""

from .backend import BACKEND
from .model import (
    ArchSpec,
    ModelParams,
    TrainConfig,
    bce_loss,
    confusion_counts,
    init_params,
    layer_shapes,
    load_params,
    loss_and_grad,
    make_dropout_mask,
    param_count,
    predict,
    predict_proba,
    save_params,
    sgd_epoch,
)

__all__ = [
    "ArchSpec",
    "BACKEND",
    "ModelParams",
    "TrainConfig",
    "bce_loss",
    "confusion_counts",
    "init_params",
    "layer_shapes",
    "load_params",
    "loss_and_grad",
    "make_dropout_mask",
    "param_count",
    "predict",
    "predict_proba",
    "save_params",
    "sgd_epoch",
]
