from .cluster import (
    Cluster,
    ClusterConfig,
    FaultMode,
    FaultSpec,
    JobKind,
    JobResult,
    TaskFailedError,
    TaskKilled,
    TaskRuntime,
    TaskSpec,
    virtual_makespan,
)
from .events import EventLog
from .network import NetworkStats
from .schedule import ScheduleRow, measure_sync_overhead, run_schedule_sweep

__all__ = [
    "Cluster",
    "ClusterConfig",
    "EventLog",
    "FaultMode",
    "FaultSpec",
    "JobKind",
    "JobResult",
    "NetworkStats",
    "ScheduleRow",
    "TaskFailedError",
    "TaskKilled",
    "TaskRuntime",
    "TaskSpec",
    "measure_sync_overhead",
    "run_schedule_sweep",
    "virtual_makespan",
]
