from .config import Aggregation, IterationStats, SliceLayout, TrainingConfig
from .driver import TrainResult, build_training_datasets, train
from .oracle import sequential_oracle

__all__ = [
    "Aggregation",
    "IterationStats",
    "SliceLayout",
    "TrainResult",
    "TrainingConfig",
    "build_training_datasets",
    "sequential_oracle",
    "train",
]
