"""Training-run configuration, parameter slice layout, per-iteration stats."""

from __future__ import annotations

import enum
from dataclasses import dataclass

from ..nn.layers import LayerSpec
from ..nn.losses import Loss


class Aggregation(enum.Enum):
    # mean of the per-task mean gradients (keeps the learning rate
    # meaningful as the partition count changes)
    SUM_THEN_SCALE_BY_N = "sum_then_scale_by_n"
    SUM = "sum"


@dataclass(frozen=True)
class TrainingConfig:
    num_partitions: int  # N: data partitions == model replicas == nodes
    iterations: int  # M
    batch_size: int  # B, per task, drawn with replacement
    learning_rate: float
    seed: int
    model_spec: LayerSpec
    loss: Loss
    aggregation: Aggregation = Aggregation.SUM_THEN_SCALE_BY_N

    def __post_init__(self) -> None:
        if self.num_partitions < 1:
            raise ValueError("num_partitions must be positive")
        if self.iterations < 0:
            raise ValueError("iterations must be non-negative")
        if self.batch_size < 1:
            raise ValueError("batch_size must be positive")
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")


@dataclass(frozen=True)
class SliceLayout:
    """Contiguous balanced partition of a length-K flat vector into N slices.

    The first K mod N slices carry the extra element, so sizes differ by
    at most one.
    """

    total: int
    offsets: tuple[int, ...]

    @classmethod
    def build(cls, total: int, num_slices: int) -> "SliceLayout":
        if total < 0 or num_slices < 1:
            raise ValueError("need total >= 0 and num_slices >= 1")
        base, extra = divmod(total, num_slices)
        offsets = [0]
        for n in range(num_slices):
            offsets.append(offsets[-1] + base + (1 if n < extra else 0))
        return cls(total=total, offsets=tuple(offsets))

    @property
    def num_slices(self) -> int:
        return len(self.offsets) - 1

    def bounds(self, n: int) -> tuple[int, int]:
        return self.offsets[n], self.offsets[n + 1]

    def sizes(self) -> tuple[int, ...]:
        return tuple(
            self.offsets[n + 1] - self.offsets[n] for n in range(self.num_slices)
        )


@dataclass(frozen=True)
class IterationStats:
    """Timing, scheduling and loss accounting for one training iteration.

    Wall-clock fields vary run to run and are excluded from reproducibility
    comparisons; the virtual fields are deterministic model outputs.
    """

    iteration: int
    loss_mean: float
    per_task_compute_wall: tuple[float, ...]
    sync_wall: float
    per_task_compute_virtual: tuple[float, ...]
    sync_virtual: float
    scheduling_events: int
