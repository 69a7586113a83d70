"""Single-process reference for synchronous data-parallel training.

No datasets, no store, no jobs: per iteration it draws the exact batches
every task would draw (same partitioning, same keyed streams), computes
the per-task mean gradients against the current weights, combines them in
ascending task order, and applies one whole-vector SGD step.  The
distributed run must match it to within slice-boundary float
reassociation -- in practice, bitwise.
"""

from __future__ import annotations

from typing import Iterable, Sequence

import numpy as np

from ..nn.model import ModelReplica, init_params, sgd_step
from ..rng import keyed_rng
from .config import Aggregation, TrainingConfig


def round_robin_partitions(samples: Sequence, num_partitions: int) -> list[tuple]:
    return [tuple(samples[p::num_partitions]) for p in range(num_partitions)]


def sequential_oracle(config: TrainingConfig, samples: Iterable) -> np.ndarray:
    samples = tuple(samples)
    n = config.num_partitions
    partitions = round_robin_partitions(samples, n)
    weights = init_params(config.model_spec, config.seed)
    replica = ModelReplica(config.model_spec, weights)

    for i in range(config.iterations):
        combined = None
        for t in range(n):
            rng = keyed_rng("batch", config.seed, t, i)
            indices = rng.integers(0, len(partitions[t]), size=config.batch_size)
            x = np.stack([partitions[t][j][0] for j in indices])
            y = np.stack([partitions[t][j][1] for j in indices])
            replica.params[:] = weights
            _, gradient = replica.backward(x, y, config.loss)
            if combined is None:
                combined = gradient.copy()
            else:
                combined += gradient
        if config.aggregation is Aggregation.SUM_THEN_SCALE_BY_N:
            combined /= n
        weights = sgd_step(weights, combined, config.learning_rate)
    return weights
