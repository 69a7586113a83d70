"""Deterministic simulated cluster.

Nodes are thread-pool domains inside one process; the driver is a single
control thread that submits jobs and blocks at their barriers.  Tasks
within a job run concurrently, share nothing but the block store, and are
re-run once if killed (their writes are idempotent).  Time-like outputs
come from a virtual clock driven by modeled costs, never from the wall
clock, so repeated runs produce identical event logs and reports.
"""

from __future__ import annotations

import enum
import math
import threading
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

from ..engine.blocks import BlockId, BlockStore, DeterminismError
from .events import EventLog
from .network import NetworkStats


class JobKind(enum.Enum):
    FORWARD_BACKWARD = "forward_backward"
    PARAMETER_SYNC = "parameter_sync"


class FaultMode(enum.Enum):
    KILL_BEFORE_EFFECTS = "kill_before_effects"
    KILL_AFTER_PARTIAL_PUT = "kill_after_partial_put"


@dataclass(frozen=True)
class FaultSpec:
    """Kill one task attempt of one job.

    KILL_BEFORE_EFFECTS aborts the task at its first store access, leaving
    no trace.  KILL_AFTER_PARTIAL_PUT lets a strict prefix of the task's
    planned puts complete (floor(planned/2) of them) and then aborts.
    """

    iteration: int
    job_kind: JobKind
    task_id: int
    mode: FaultMode


@dataclass(frozen=True)
class ClusterConfig:
    num_nodes: int
    threads_per_node: int = 1
    schedule_cost: float = 1e-3  # virtual seconds per task dispatch
    group_size: int = 1  # tasks dispatched per scheduling action
    byte_latency: float = 0.0  # virtual seconds per fetched byte
    fb_compute_time: float = 1.0  # modeled forward-backward task duration
    sync_compute_time: float = 0.0  # modeled sync task duration (update only)
    fault_plan: tuple[FaultSpec, ...] = ()

    def __post_init__(self) -> None:
        if self.num_nodes < 1 or self.threads_per_node < 1 or self.group_size < 1:
            raise ValueError("num_nodes, threads_per_node and group_size must be positive")

    def modeled_compute(self, job_kind: JobKind) -> float:
        if job_kind is JobKind.FORWARD_BACKWARD:
            return self.fb_compute_time
        return self.sync_compute_time


@dataclass(frozen=True)
class TaskSpec:
    task_id: int
    node: int
    fn: Callable[["TaskRuntime"], object]
    planned_puts: int = 0
    modeled_seconds: Optional[float] = None  # overrides the job-kind default


class TaskKilled(Exception):
    """Simulated kill injected by a FaultSpec."""


class TaskFailedError(RuntimeError):
    """A task failed even after its retry."""


class TaskRuntime:
    """Per-attempt handle a task body uses for every effect.

    Store accesses flow through here so fault kills, event buffering and
    fetched-byte tracking all see them.
    """

    def __init__(
        self,
        store: BlockStore,
        node: int,
        job_kind: JobKind,
        iteration: int,
        task_id: int,
        attempt: int,
        buffer: list[dict],
        kill_on_first_effect: bool = False,
        kill_after_puts: Optional[int] = None,
    ):
        self.store = store
        self.node = node
        self.job_kind = job_kind
        self.iteration = iteration
        self.task_id = task_id
        self.attempt = attempt
        self._buffer = buffer
        self._kill_on_first_effect = kill_on_first_effect
        self._kill_after_puts = kill_after_puts
        self._puts_done = 0
        self.bytes_in = 0

    def _effect(self) -> None:
        if self._kill_on_first_effect:
            raise TaskKilled("killed before effects")

    def put_block(self, block_id: BlockId, blob: bytes) -> None:
        self._effect()
        if self._kill_after_puts is not None and self._puts_done >= self._kill_after_puts:
            raise TaskKilled(f"killed after {self._puts_done} puts")
        self.store.put(block_id, blob, self.node)
        self._puts_done += 1
        self.log("block_put", block=block_id.label(), size=len(blob))

    def get_block(self, block_id: BlockId) -> bytes:
        self._effect()
        blob = self.store.get(block_id, self.node)
        producer = self.store.producer_of(block_id)
        transferred = 0 if producer == self.node else len(blob)
        self.bytes_in += transferred
        self.log(
            "block_get",
            block=block_id.label(),
            size=len(blob),
            producer=producer,
            transferred=transferred,
        )
        return blob

    def log(self, event: str, **fields) -> None:
        self._buffer.append(
            {
                "event": event,
                "job": self.job_kind.value,
                "iteration": self.iteration,
                "task": self.task_id,
                "node": self.node,
                "attempt": self.attempt,
                **fields,
            }
        )


@dataclass
class JobResult:
    job_kind: JobKind
    iteration: int
    results: dict[int, object]
    wall_seconds: dict[int, float]
    virtual_seconds: dict[int, float]
    virtual_makespan: float
    wall_makespan: float
    scheduling_events: int
    retries: int


def virtual_makespan(
    num_tasks: int, durations: Sequence[float], schedule_cost: float, group_size: int
) -> float:
    """Job makespan under the virtual-clock model: dispatch cost plus the
    slowest task."""
    overhead = num_tasks * schedule_cost / group_size
    return overhead + (max(durations) if durations else 0.0)


def scheduling_events(num_tasks: int, group_size: int) -> int:
    return math.ceil(num_tasks / group_size)


class Cluster:
    """Executes jobs of tasks over per-node thread pools with a barrier
    after each job."""

    def __init__(
        self,
        config: ClusterConfig,
        events: EventLog | None = None,
        network: NetworkStats | None = None,
    ):
        self.config = config
        self.events = events if events is not None else EventLog()
        self.network = network if network is not None else NetworkStats()
        self._pools = [
            ThreadPoolExecutor(
                max_workers=config.threads_per_node, thread_name_prefix=f"node{i}"
            )
            for i in range(config.num_nodes)
        ]
        self._clock = 0.0
        self._fault_lock = threading.Lock()
        self._unused_faults = list(config.fault_plan)

    @property
    def clock(self) -> float:
        return self._clock

    def shutdown(self) -> None:
        for pool in self._pools:
            pool.shutdown(wait=True)

    def __enter__(self) -> "Cluster":
        return self

    def __exit__(self, *exc) -> None:
        self.shutdown()

    def _take_fault(self, job_kind: JobKind, iteration: int, task_id: int) -> FaultSpec | None:
        with self._fault_lock:
            for i, fault in enumerate(self._unused_faults):
                if (
                    fault.job_kind is job_kind
                    and fault.iteration == iteration
                    and fault.task_id == task_id
                ):
                    return self._unused_faults.pop(i)
            return None

    def submit_job(
        self, tasks: Sequence[TaskSpec], job_kind: JobKind, iteration: int, store: BlockStore
    ) -> JobResult:
        """Run all tasks, applying fault kills and single retries, and
        return after every task has completed (the job barrier)."""
        for spec in tasks:
            if not 0 <= spec.node < self.config.num_nodes:
                raise ValueError(f"task {spec.task_id} placed on unknown node {spec.node}")
        self.events.append(
            "job_submitted", job=job_kind.value, iteration=iteration, num_tasks=len(tasks)
        )
        wall_start = time.perf_counter()
        futures = [
            self._pools[spec.node].submit(self._run_task, spec, job_kind, iteration, store)
            for spec in tasks
        ]
        outcomes = [f.result() for f in futures]  # barrier; propagates failures
        wall_makespan = time.perf_counter() - wall_start

        results: dict[int, object] = {}
        wall: dict[int, float] = {}
        virtual: dict[int, float] = {}
        retries = 0
        for spec, (result, buffer, wall_s, bytes_in, was_retried) in zip(tasks, outcomes):
            results[spec.task_id] = result
            wall[spec.task_id] = wall_s
            base = (
                spec.modeled_seconds
                if spec.modeled_seconds is not None
                else self.config.modeled_compute(job_kind)
            )
            virtual[spec.task_id] = base + bytes_in * self.config.byte_latency
            retries += int(was_retried)
        # flush per-task buffers in task order: the log never depends on
        # thread interleaving
        for _, buffer in sorted(zip((s.task_id for s in tasks), (o[1] for o in outcomes))):
            self.events.extend(buffer)

        makespan = virtual_makespan(
            len(tasks), list(virtual.values()), self.config.schedule_cost, self.config.group_size
        )
        self._clock += makespan
        events_count = scheduling_events(len(tasks), self.config.group_size)
        self.events.append(
            "job_barrier",
            job=job_kind.value,
            iteration=iteration,
            virtual_makespan=makespan,
            clock=self._clock,
            scheduling_events=events_count,
            retries=retries,
        )
        return JobResult(
            job_kind=job_kind,
            iteration=iteration,
            results=results,
            wall_seconds=wall,
            virtual_seconds=virtual,
            virtual_makespan=makespan,
            wall_makespan=wall_makespan,
            scheduling_events=events_count,
            retries=retries,
        )

    def _run_task(
        self, spec: TaskSpec, job_kind: JobKind, iteration: int, store: BlockStore
    ) -> tuple[object, list[dict], float, int, bool]:
        buffer: list[dict] = []
        fault = self._take_fault(job_kind, iteration, spec.task_id)
        kill_first = fault is not None and fault.mode is FaultMode.KILL_BEFORE_EFFECTS
        kill_after = (
            spec.planned_puts // 2
            if fault is not None and fault.mode is FaultMode.KILL_AFTER_PARTIAL_PUT
            else None
        )

        attempt = 1
        rt = TaskRuntime(
            store,
            spec.node,
            job_kind,
            iteration,
            spec.task_id,
            attempt,
            buffer,
            kill_on_first_effect=kill_first,
            kill_after_puts=kill_after,
        )
        rt.log("task_start")
        try:
            started = time.perf_counter()
            result = spec.fn(rt)
            wall_s = time.perf_counter() - started
            rt.log("task_end")
            return result, buffer, wall_s, rt.bytes_in, False
        except TaskKilled as kill:
            rt.log("task_killed", reason=str(kill), mode=fault.mode.value)
        except DeterminismError:
            raise
        except Exception as exc:  # noqa: BLE001 - single retry for any task failure
            rt.log("task_failed", error=repr(exc))

        attempt = 2
        rt = TaskRuntime(store, spec.node, job_kind, iteration, spec.task_id, attempt, buffer)
        rt.log("task_start")
        try:
            started = time.perf_counter()
            result = spec.fn(rt)
            wall_s = time.perf_counter() - started
        except Exception as exc:
            rt.log("task_failed", error=repr(exc))
            raise TaskFailedError(
                f"task {spec.task_id} of {job_kind.value}@{iteration} failed after retry"
            ) from exc
        rt.log("task_end")
        return result, buffer, wall_s, rt.bytes_in, True
