"""Run manifests: the plain-text key-value format describing a run.

A manifest pins everything a run depends on (workload, training
hyperparameters, cluster model), is serialized alongside outputs, and
hashes into the id every report carries.  Re-running the same manifest
reproduces all non-wall-clock outputs bit-identically.

Format: one ``key = value`` pair per line; ``#`` starts a comment; keys
are exactly the fields below.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, replace
from pathlib import Path

from .sim.cluster import ClusterConfig
from .trainer.config import Aggregation, TrainingConfig
from .workloads import get_workload

REPORT_VERSION = 1

_INT_FIELDS = {"version", "num_partitions", "iterations", "batch_size", "seed", "group_size"}
_FLOAT_FIELDS = {"learning_rate", "schedule_cost", "byte_latency", "fb_compute_time"}
_STR_FIELDS = {"workload", "aggregation"}
_FIELD_ORDER = [
    "version",
    "workload",
    "num_partitions",
    "iterations",
    "batch_size",
    "learning_rate",
    "seed",
    "aggregation",
    "schedule_cost",
    "group_size",
    "byte_latency",
    "fb_compute_time",
]


@dataclass(frozen=True)
class RunManifest:
    workload: str
    num_partitions: int
    iterations: int
    batch_size: int
    learning_rate: float
    seed: int
    aggregation: str = "sum_then_scale_by_n"
    schedule_cost: float = 1e-3
    group_size: int = 1
    byte_latency: float = 0.0
    fb_compute_time: float = 1.0
    version: int = REPORT_VERSION

    def to_text(self) -> str:
        lines = ["# slicetrain run manifest"]
        for key in _FIELD_ORDER:
            value = getattr(self, key)
            lines.append(f"{key} = {value!r}" if isinstance(value, str) else f"{key} = {value}")
        return "\n".join(lines) + "\n"

    def digest(self) -> str:
        return hashlib.sha256(self.to_text().encode()).hexdigest()[:12]

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.to_text())

    def with_overrides(self, **kwargs) -> "RunManifest":
        return replace(self, **kwargs)

    def training_config(self) -> TrainingConfig:
        workload = get_workload(self.workload)
        return TrainingConfig(
            num_partitions=self.num_partitions,
            iterations=self.iterations,
            batch_size=self.batch_size,
            learning_rate=self.learning_rate,
            seed=self.seed,
            model_spec=workload.model_spec,
            loss=workload.loss,
            aggregation=Aggregation(self.aggregation),
        )

    def cluster_config(self, fault_plan=()) -> ClusterConfig:
        return ClusterConfig(
            num_nodes=self.num_partitions,
            schedule_cost=self.schedule_cost,
            group_size=self.group_size,
            byte_latency=self.byte_latency,
            fb_compute_time=self.fb_compute_time,
            fault_plan=tuple(fault_plan),
        )

    def samples(self) -> list:
        workload = get_workload(self.workload)
        return workload.make_samples(self.seed)


class ManifestError(ValueError):
    pass


def parse_manifest(text: str) -> RunManifest:
    values: dict = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ManifestError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, _, value = (part.strip() for part in line.partition("="))
        if key in _INT_FIELDS:
            values[key] = int(value)
        elif key in _FLOAT_FIELDS:
            values[key] = float(value)
        elif key in _STR_FIELDS:
            values[key] = value.strip("'\"")
        else:
            raise ManifestError(f"line {lineno}: unknown key {key!r}")
    missing = {"workload", "num_partitions", "iterations", "batch_size", "learning_rate", "seed"} - set(values)
    if missing:
        raise ManifestError(f"missing required keys: {sorted(missing)}")
    version = values.pop("version", REPORT_VERSION)
    if version != REPORT_VERSION:
        raise ManifestError(f"unsupported manifest version {version}")
    return RunManifest(**values)


def load_manifest(path: str | Path) -> RunManifest:
    return parse_manifest(Path(path).read_text())
