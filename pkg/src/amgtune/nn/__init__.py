"""Numpy convolutional network for cost-curve regression."""
from .checkpoint import CHECKPOINT_VERSION, CheckpointError, load_checkpoint, save_checkpoint
from .network import (
    ConvBlock,
    NetworkParams,
    NetworkSpec,
    conv_features,
    forward,
    forward_batch,
    he_init,
    head_forward,
    loss,
    loss_and_grad,
    scalar_inputs,
)
from .train import (
    AdamState,
    History,
    PlateauSchedule,
    SampleSet,
    TrainConfig,
    TrainingError,
    adam_update,
    evaluate_loss,
    predict_samples,
    train,
    train_step,
    write_history_csv,
)

__all__ = [
    "AdamState",
    "CHECKPOINT_VERSION",
    "CheckpointError",
    "ConvBlock",
    "History",
    "NetworkParams",
    "NetworkSpec",
    "PlateauSchedule",
    "SampleSet",
    "TrainConfig",
    "TrainingError",
    "adam_update",
    "conv_features",
    "evaluate_loss",
    "forward",
    "forward_batch",
    "he_init",
    "head_forward",
    "load_checkpoint",
    "loss",
    "loss_and_grad",
    "predict_samples",
    "save_checkpoint",
    "scalar_inputs",
    "train",
    "train_step",
    "write_history_csv",
]
