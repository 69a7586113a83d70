"""The driver: a single control thread running M iterations of two jobs.

Each iteration submits the forward-backward job (N tasks), waits at its
barrier, submits the parameter-sync job (N tasks), waits again.  The
dependence between the jobs is managed entirely here; the tasks themselves
are stateless and independent.  Final weights are assembled from the last
iteration's weight-slice blocks.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Iterable, Optional

import numpy as np

from ..engine.blocks import BlockId, BlockStore, decode_f64
from ..engine.dataset import DatasetEngine, DistributedDataset, ensure_transform
from ..nn.layers import param_count, spec_fingerprint
from ..nn.model import ModelReplica, init_params
from ..sim.cluster import Cluster, ClusterConfig, FaultSpec, JobKind
from ..sim.events import EventLog
from ..sim.network import NetworkStats
from .config import IterationStats, SliceLayout, TrainingConfig
from .tasks import make_forward_backward_task, make_parameter_sync_task


@dataclass
class TrainResult:
    final_params: np.ndarray
    stats: list[IterationStats]
    network: NetworkStats
    events: EventLog
    store: BlockStore
    layout: SliceLayout
    initial_params: np.ndarray
    engine: DatasetEngine
    sample_dataset: DistributedDataset
    model_dataset: DistributedDataset


def build_training_datasets(
    engine: DatasetEngine, config: TrainingConfig, samples: Iterable
) -> tuple[DistributedDataset, DistributedDataset]:
    """Co-partitioned, cached sample and model-replica datasets.

    The model dataset is derived from a registered transform keyed by
    (spec, seed), so a lost partition is rebuilt by lineage replay with
    bit-identical initial parameters.
    """
    samples = tuple(samples)
    if not samples:
        raise ValueError("no training samples")
    n = config.num_partitions
    sample_ds = engine.parallelize(samples, n)
    engine.cache_partitions(sample_ds)

    spec, seed = config.model_spec, config.seed
    transform_id = ensure_transform(
        f"replica-init:{seed}:{spec_fingerprint(spec)}",
        lambda _indices: (ModelReplica(spec, init_params(spec, seed)),),
    )
    replica_index_ds = engine.parallelize(range(n), n)
    model_ds = engine.map_partitions(replica_index_ds, transform_id)
    engine.cache_partitions(model_ds)
    return sample_ds, model_ds


def train(
    config: TrainingConfig,
    samples: Iterable,
    fault_plan: Iterable[FaultSpec] | None = None,
    cluster_config: ClusterConfig | None = None,
    after_iteration: Optional[Callable[[int, DatasetEngine, DistributedDataset], None]] = None,
) -> TrainResult:
    """Run synchronous data-parallel training; deterministic given
    (config, samples, fault_plan).

    ``after_iteration`` is a test hook called between iterations with
    (iteration, engine, model_dataset); production runs leave it unset.
    """
    n = config.num_partitions
    if cluster_config is None:
        cluster_config = ClusterConfig(
            num_nodes=n, fault_plan=tuple(fault_plan) if fault_plan else ()
        )
    elif fault_plan:
        raise ValueError("pass the fault plan inside cluster_config when supplying one")
    if cluster_config.num_nodes != n:
        raise ValueError("one task per node: cluster size must equal num_partitions")

    engine = DatasetEngine(num_nodes=n)
    network = NetworkStats()
    events = EventLog()
    store = BlockStore(network)
    layout = SliceLayout.build(param_count(config.model_spec), n)
    initial = init_params(config.model_spec, config.seed)

    sample_ds, model_ds = build_training_datasets(engine, config, samples)
    zipped = engine.zip_partitions(model_ds, sample_ds)

    stats: list[IterationStats] = []
    with Cluster(cluster_config, events, network) as cluster:
        for i in range(config.iterations):
            fb_tasks = []
            for t in range(n):
                (replica,), sample_part = engine.materialize(zipped, t)
                fb_tasks.append(
                    make_forward_backward_task(
                        t, i, replica, sample_part, layout, config, initial
                    )
                )
            fb = cluster.submit_job(fb_tasks, JobKind.FORWARD_BACKWARD, i, store)

            sync_tasks = [
                make_parameter_sync_task(t, i, layout, config, initial) for t in range(n)
            ]
            sync = cluster.submit_job(sync_tasks, JobKind.PARAMETER_SYNC, i, store)

            store.evict_before(i - 1)
            losses = [fb.results[t]["loss"] for t in range(n)]
            stats.append(
                IterationStats(
                    iteration=i,
                    loss_mean=sum(losses) / n,
                    per_task_compute_wall=tuple(fb.wall_seconds[t] for t in range(n)),
                    sync_wall=sync.wall_makespan,
                    per_task_compute_virtual=tuple(fb.virtual_seconds[t] for t in range(n)),
                    sync_virtual=sync.virtual_makespan,
                    scheduling_events=fb.scheduling_events + sync.scheduling_events,
                )
            )
            if after_iteration is not None:
                after_iteration(i, engine, model_ds)

    if config.iterations == 0:
        final = initial.copy()
    else:
        final = np.concatenate(
            [
                decode_f64(store.peek(BlockId.weight_slice(config.iterations - 1, t)))
                for t in range(n)
            ]
        )
    return TrainResult(
        final_params=final,
        stats=stats,
        network=network,
        events=events,
        store=store,
        layout=layout,
        initial_params=initial,
        engine=engine,
        sample_dataset=sample_ds,
        model_dataset=model_ds,
    )
