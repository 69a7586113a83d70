"""Scheduling-overhead reports from the virtual-clock model.

Dispatching one task costs a fixed virtual duration; group scheduling
amortizes that cost over ``group_size`` tasks per scheduling action.  The
sweep reports dispatch overhead as a fraction of per-job compute time,
which grows linearly with the task count and shrinks with the group size.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

from .cluster import scheduling_events


@dataclass(frozen=True)
class ScheduleRow:
    task_count: int
    group_size: int
    schedule_cost: float
    compute_time: float
    scheduling_overhead: float
    overhead_fraction: float
    scheduling_events: int


def run_schedule_sweep(
    task_counts: Sequence[int],
    schedule_cost: float,
    compute_time: float,
    group_sizes: Sequence[int],
) -> list[ScheduleRow]:
    """Overhead table over (task_count, group_size) pairs.

    ``compute_time`` is the modeled duration of every task in the job, so
    per-job compute is its max, i.e. the same constant.
    """
    if not task_counts or not group_sizes:
        raise ValueError("task_counts and group_sizes must be nonempty")
    if compute_time <= 0:
        raise ValueError("compute_time must be positive")
    rows = []
    for group in group_sizes:
        for count in task_counts:
            overhead = count * schedule_cost / group
            rows.append(
                ScheduleRow(
                    task_count=count,
                    group_size=group,
                    schedule_cost=schedule_cost,
                    compute_time=compute_time,
                    scheduling_overhead=overhead,
                    overhead_fraction=overhead / compute_time,
                    scheduling_events=scheduling_events(count, group),
                )
            )
    return rows


def measure_sync_overhead(iteration_stats: Sequence) -> tuple[list[float], float]:
    """Per-iteration sync time as a fraction of mean compute time.

    Uses the virtual (modeled) durations so the report is deterministic;
    wall-clock timing stays informational.  Returns the per-iteration
    fractions and their run-level mean.
    """
    if not iteration_stats:
        raise ValueError("no iteration stats to measure")
    fractions = []
    for stats in iteration_stats:
        compute = stats.per_task_compute_virtual
        mean_compute = sum(compute) / len(compute)
        if mean_compute <= 0:
            raise ValueError("modeled compute time must be positive for overhead fractions")
        fractions.append(stats.sync_virtual / mean_compute)
    return fractions, sum(fractions) / len(fractions)
