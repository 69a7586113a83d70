"""The two task bodies of each training iteration.

Forward-backward task n: assemble the latest weights from the previous
iteration's weight-slice blocks, draw a keyed random batch from its local
sample partition, compute the local gradient, slice it, and publish one
gradient-slice block per destination.

Parameter-sync task n: shuffle in the n-th slice of every local gradient,
sum them in fixed task order, scale, update the n-th weight slice, and
publish it -- the task-side broadcast the next iteration reads.

All effects flow through the block store, so re-running either task
reproduces its writes byte for byte.
"""

from __future__ import annotations

import hashlib

import numpy as np

from ..engine.blocks import BlockId, decode_f64, encode_f64
from ..nn.model import ModelReplica, sgd_step
from ..rng import keyed_rng
from ..sim.cluster import TaskRuntime, TaskSpec
from .config import Aggregation, SliceLayout, TrainingConfig


def assemble_weights(fetch, iteration: int, layout: SliceLayout) -> np.ndarray:
    """Concatenate all weight slices of ``iteration`` in slice order."""
    slices = [
        decode_f64(fetch(BlockId.weight_slice(iteration, n)))
        for n in range(layout.num_slices)
    ]
    return np.concatenate(slices)


def weights_digest(params: np.ndarray) -> str:
    return hashlib.sha256(params.tobytes()).hexdigest()[:16]


def make_forward_backward_task(
    task_id: int,
    iteration: int,
    replica: ModelReplica,
    sample_partition: tuple,
    layout: SliceLayout,
    config: TrainingConfig,
    initial_params: np.ndarray,
) -> TaskSpec:
    n = task_id

    def body(rt: TaskRuntime) -> dict:
        # (1) read the latest weights; iteration 0 starts from the shared
        # initialization, before any weight block exists
        if iteration > 0:
            params = assemble_weights(rt.get_block, iteration - 1, layout)
        else:
            params = initial_params.copy()
        replica.params[:] = params
        rt.log("weights_assembled", digest=weights_digest(replica.params))

        # (2) random batch from the local partition only, keyed so a
        # re-executed task repeats its draws
        rng = keyed_rng("batch", config.seed, n, iteration)
        indices = rng.integers(0, len(sample_partition), size=config.batch_size)
        x = np.stack([sample_partition[j][0] for j in indices])
        y = np.stack([sample_partition[j][1] for j in indices])

        # (3) local gradient
        loss_value, gradient = replica.backward(x, y, config.loss)

        # (4) slice and publish
        for s in range(layout.num_slices):
            lo, hi = layout.bounds(s)
            rt.put_block(
                BlockId.gradient_slice(iteration, n, s), encode_f64(gradient[lo:hi])
            )
        return {"loss": float(loss_value)}

    return TaskSpec(
        task_id=n, node=n, fn=body, planned_puts=layout.num_slices
    )


def make_parameter_sync_task(
    task_id: int,
    iteration: int,
    layout: SliceLayout,
    config: TrainingConfig,
    initial_params: np.ndarray,
) -> TaskSpec:
    n = task_id
    num_tasks = config.num_partitions

    def body(rt: TaskRuntime) -> dict:
        # shuffle: the n-th slice of every task's gradient, summed in
        # ascending task order for bit determinism
        total = None
        for t in range(num_tasks):
            piece = decode_f64(rt.get_block(BlockId.gradient_slice(iteration, t, n)))
            if total is None:
                total = piece.copy()
            else:
                total += piece
        if config.aggregation is Aggregation.SUM_THEN_SCALE_BY_N:
            total /= num_tasks

        if iteration > 0:
            previous = decode_f64(rt.get_block(BlockId.weight_slice(iteration - 1, n)))
        else:
            lo, hi = layout.bounds(n)
            previous = initial_params[lo:hi]
        updated = sgd_step(previous, total, config.learning_rate)
        if not np.all(np.isfinite(updated)):
            raise FloatingPointError(f"non-finite weight update in slice {n}")

        # publishing the slice is the task-side broadcast
        rt.put_block(BlockId.weight_slice(iteration, n), encode_f64(updated))
        return {}

    return TaskSpec(task_id=n, node=n, fn=body, planned_puts=1)
