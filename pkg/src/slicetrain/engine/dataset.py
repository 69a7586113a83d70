"""Immutable partitioned datasets with lineage-based recomputation.

A dataset is driver-side metadata: an id, a partition count, a placement
map and a lineage record.  Partition contents are derived on demand by
replaying lineage (round-robin slicing of source records, registered
partition-level transforms, partition-wise zips) and may be pinned in a
per-node cache.  Because transforms are registered under stable ids and
must be deterministic, replaying any partition reproduces identical
contents -- that is the whole recovery story: lose a partition, run its
lineage again.

Transforms are coarse-grained: they receive an entire partition (a tuple
of records) and return the new partition contents.
"""

from __future__ import annotations

import hashlib
import itertools
import struct
import threading
from collections import Counter
from dataclasses import dataclass
from typing import Callable, Iterable, Sequence, Union

import numpy as np

_TRANSFORMS: dict[str, Callable[[tuple], Sequence]] = {}


def register_transform(transform_id: str, fn: Callable[[tuple], Sequence]) -> str:
    """Register a deterministic partition transform under a stable id."""
    if transform_id in _TRANSFORMS:
        raise ValueError(f"transform {transform_id!r} already registered")
    _TRANSFORMS[transform_id] = fn
    return transform_id


def ensure_transform(transform_id: str, fn: Callable[[tuple], Sequence]) -> str:
    """Register ``fn`` unless the id already exists.

    Intended for content-derived ids (the id encodes everything the
    transform closes over), where re-registration is a harmless no-op.
    """
    _TRANSFORMS.setdefault(transform_id, fn)
    return transform_id


def get_transform(transform_id: str) -> Callable[[tuple], Sequence]:
    try:
        return _TRANSFORMS[transform_id]
    except KeyError:
        raise KeyError(f"unknown transform id {transform_id!r}") from None


@dataclass(frozen=True)
class PartitionId:
    dataset_id: str
    index: int


@dataclass(frozen=True)
class SourceLineage:
    records: tuple  # partitioned round-robin by record index


@dataclass(frozen=True)
class MapLineage:
    parent_id: str
    transform_id: str


@dataclass(frozen=True)
class ZipLineage:
    left_id: str
    right_id: str


Lineage = Union[SourceLineage, MapLineage, ZipLineage]


@dataclass(frozen=True)
class DistributedDataset:
    """Immutable handle; all behaviour lives on the owning DatasetEngine."""

    id: str
    num_partitions: int
    lineage: Lineage
    placement: tuple[int, ...]  # partition index -> node id

    def partition_ids(self) -> list[PartitionId]:
        return [PartitionId(self.id, p) for p in range(self.num_partitions)]


class DatasetEngine:
    """Driver-side owner of dataset metadata, the partition cache, and
    transform invocation accounting.

    Datasets never change after creation; transforms return new datasets.
    The cache holds materialized partitions of datasets marked cached,
    keyed to the node the partition is placed on, so dropping a node's
    cache forces lineage replay for exactly its partitions.
    """

    def __init__(self, num_nodes: int = 1):
        if num_nodes < 1:
            raise ValueError("need at least one node")
        self.num_nodes = num_nodes
        self._datasets: dict[str, DistributedDataset] = {}
        self._cache: dict[tuple[str, int], tuple] = {}
        self._pinned: set[str] = set()
        self._lock = threading.Lock()
        self._ids = itertools.count()
        # (dataset_id, partition) -> number of transform executions
        self.invocations: Counter = Counter()

    def _register(self, ds: DistributedDataset) -> DistributedDataset:
        self._datasets[ds.id] = ds
        return ds

    def _new_id(self, prefix: str) -> str:
        return f"{prefix}-{next(self._ids)}"

    # ------------------------------------------------------------------
    # dataset construction

    def parallelize(self, records: Iterable, num_partitions: int) -> DistributedDataset:
        """Distribute records round-robin by index into ``num_partitions``."""
        records = tuple(records)
        if num_partitions < 1:
            raise ValueError("num_partitions must be positive")
        if not records:
            raise ValueError("cannot parallelize an empty record list")
        placement = tuple(p % self.num_nodes for p in range(num_partitions))
        return self._register(
            DistributedDataset(
                id=self._new_id("source"),
                num_partitions=num_partitions,
                lineage=SourceLineage(records),
                placement=placement,
            )
        )

    def map_partitions(self, ds: DistributedDataset, transform_id: str) -> DistributedDataset:
        """Derive a new dataset by a registered partition transform.

        Application is deferred until a job materializes partitions; the
        parent is untouched.
        """
        self._require(ds)
        get_transform(transform_id)  # fail fast on unknown ids
        return self._register(
            DistributedDataset(
                id=self._new_id("map"),
                num_partitions=ds.num_partitions,
                lineage=MapLineage(ds.id, transform_id),
                placement=ds.placement,
            )
        )

    def zip_partitions(
        self, left: DistributedDataset, right: DistributedDataset
    ) -> DistributedDataset:
        """Pair partition p of ``left`` with partition p of ``right``.

        Requires co-partitioning and identical placement; the pairing is
        local to each node, so no transfer is ever recorded for it.
        """
        self._require(left)
        self._require(right)
        if left.num_partitions != right.num_partitions:
            raise ValueError(
                f"zip partition-count mismatch: {left.num_partitions} vs {right.num_partitions}"
            )
        if left.placement != right.placement:
            raise ValueError("zip placement mismatch: datasets are not co-located")
        return self._register(
            DistributedDataset(
                id=self._new_id("zip"),
                num_partitions=left.num_partitions,
                lineage=ZipLineage(left.id, right.id),
                placement=left.placement,
            )
        )

    def cache_partitions(self, ds: DistributedDataset) -> None:
        """Pin materialized partitions on their assigned workers."""
        self._require(ds)
        self._pinned.add(ds.id)

    # ------------------------------------------------------------------
    # materialization

    def materialize(self, ds: DistributedDataset, partition: int) -> tuple:
        """Return partition contents, replaying lineage on a cache miss."""
        self._require(ds)
        if not 0 <= partition < ds.num_partitions:
            raise IndexError(f"partition {partition} out of range")
        key = (ds.id, partition)
        with self._lock:
            cached = self._cache.get(key)
        if cached is not None:
            return cached
        contents = self._compute(ds, partition)
        if ds.id in self._pinned:
            with self._lock:
                contents = self._cache.setdefault(key, contents)
        return contents

    def recompute_partition(self, ds: DistributedDataset, partition: int) -> tuple:
        """Replay lineage unconditionally, bypassing this dataset's cache."""
        self._require(ds)
        return self._compute(ds, partition)

    def _compute(self, ds: DistributedDataset, partition: int) -> tuple:
        lin = ds.lineage
        if isinstance(lin, SourceLineage):
            return lin.records[partition :: ds.num_partitions]
        if isinstance(lin, MapLineage):
            parent = self._datasets[lin.parent_id]
            parent_contents = self.materialize(parent, partition)
            fn = get_transform(lin.transform_id)
            with self._lock:
                self.invocations[(ds.id, partition)] += 1
            return tuple(fn(parent_contents))
        if isinstance(lin, ZipLineage):
            left = self.materialize(self._datasets[lin.left_id], partition)
            right = self.materialize(self._datasets[lin.right_id], partition)
            return (left, right)
        raise TypeError(f"unknown lineage {lin!r}")

    def drop_node_cache(self, node: int) -> int:
        """Evict every cached partition resident on ``node`` (worker loss)."""
        with self._lock:
            lost = [
                key
                for key in self._cache
                if self._datasets[key[0]].placement[key[1]] == node
            ]
            for key in lost:
                del self._cache[key]
            return len(lost)

    def cached_partition_count(self) -> int:
        with self._lock:
            return len(self._cache)

    def _require(self, ds: DistributedDataset) -> None:
        if ds.id not in self._datasets:
            raise KeyError(f"dataset {ds.id!r} does not belong to this engine")


# ----------------------------------------------------------------------
# content fingerprinting (byte-identity checks for lineage replay)


def fingerprint(value) -> str:
    """Stable hex digest of a record structure's canonical byte encoding."""
    h = hashlib.sha256()
    _feed(h, value)
    return h.hexdigest()


def _feed(h, value) -> None:
    if isinstance(value, np.ndarray):
        h.update(b"A")
        h.update(value.dtype.str.encode())
        h.update(repr(value.shape).encode())
        h.update(np.ascontiguousarray(value).tobytes())
    elif isinstance(value, bytes):
        h.update(b"B")
        h.update(value)
    elif isinstance(value, str):
        h.update(b"S")
        h.update(value.encode("utf-8"))
    elif isinstance(value, bool):
        h.update(b"L1" if value else b"L0")
    elif isinstance(value, (int, np.integer)):
        h.update(b"I")
        h.update(int(value).to_bytes(16, "little", signed=True))
    elif isinstance(value, (float, np.floating)):
        h.update(b"F")
        h.update(struct.pack("<d", float(value)))
    elif value is None:
        h.update(b"N")
    elif isinstance(value, (tuple, list)):
        h.update(b"T(")
        for item in value:
            _feed(h, item)
            h.update(b",")
        h.update(b")")
    else:
        raise TypeError(f"cannot fingerprint {type(value).__name__}")
