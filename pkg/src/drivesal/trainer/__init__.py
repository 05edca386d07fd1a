"""Training procedures and their shared deterministic machinery."""

from drivesal.trainer.core import (
    TrainConfig,
    TrainReport,
    accumulate_batch,
    epoch_order,
    evaluate_in_chunks,
    fit,
)
from drivesal.trainer.data import (
    DriverData,
    load_driver_data,
    saliency_arrays,
    session_arrays,
)
from drivesal.trainer.train import (
    train_agents,
    train_attention_unsupervised,
    train_driver,
    train_roadsal,
)

__all__ = [
    "DriverData",
    "TrainConfig",
    "TrainReport",
    "accumulate_batch",
    "epoch_order",
    "evaluate_in_chunks",
    "fit",
    "load_driver_data",
    "saliency_arrays",
    "session_arrays",
    "train_agents",
    "train_attention_unsupervised",
    "train_driver",
    "train_roadsal",
]
