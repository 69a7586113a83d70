"""Command-line entry point.

Subcommands: train, verify-oracle, bench-comm, bench-sched, fault-drill.
Every report CSV starts with a comment line carrying the schema version
and the manifest digest, then a header row.  All outputs except
wall-clock timing columns are bit-reproducible from the manifest.
"""

from __future__ import annotations

import argparse
import csv
import sys
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .engine.blocks import encode_f64
from .manifest import REPORT_VERSION, RunManifest, load_manifest
from .sim.cluster import FaultMode, FaultSpec, JobKind
from .sim.schedule import measure_sync_overhead, run_schedule_sweep
from .trainer.config import TrainingConfig
from .trainer.driver import TrainResult, train
from .trainer.oracle import sequential_oracle
from .workloads import dummy_comm_workload

ORACLE_TOLERANCE = 1e-9


def write_report_csv(path: Path, manifest_digest: str, fieldnames: list[str], rows: list[dict]) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(f"# slicetrain-report schema={REPORT_VERSION} manifest={manifest_digest}\n")
        writer = csv.DictWriter(fh, fieldnames=fieldnames)
        writer.writeheader()
        writer.writerows(rows)


def read_report_csv(path: Path) -> list[dict]:
    with open(path) as fh:
        rows = [line for line in fh if not line.startswith("#")]
    return list(csv.DictReader(rows))


# ----------------------------------------------------------------------
# train


def write_train_artifacts(result: TrainResult, manifest: RunManifest, out_dir: Path) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    digest = manifest.digest()
    manifest.save(out_dir / "manifest.txt")
    (out_dir / "final_params.bin").write_bytes(encode_f64(result.final_params))
    result.events.dump(out_dir / "events.jsonl")

    write_report_csv(
        out_dir / "losses.csv",
        digest,
        ["iteration", "loss_mean"],
        [{"iteration": s.iteration, "loss_mean": repr(s.loss_mean)} for s in result.stats],
    )
    write_report_csv(
        out_dir / "network.csv",
        digest,
        ["iteration", "phase", "node", "inbound_bytes", "outbound_bytes"],
        result.network.rows(),
    )
    # *_wall columns are measured wall time: informational, not reproducible
    iteration_rows = []
    for s in result.stats:
        compute_virtual_mean = sum(s.per_task_compute_virtual) / len(s.per_task_compute_virtual)
        iteration_rows.append(
            {
                "iteration": s.iteration,
                "loss_mean": repr(s.loss_mean),
                "scheduling_events": s.scheduling_events,
                "compute_virtual_mean": repr(compute_virtual_mean),
                "sync_virtual": repr(s.sync_virtual),
                "sync_overhead_fraction": repr(s.sync_virtual / compute_virtual_mean),
                "compute_wall_mean": sum(s.per_task_compute_wall) / len(s.per_task_compute_wall),
                "compute_wall_max": max(s.per_task_compute_wall),
                "sync_wall": s.sync_wall,
            }
        )
    write_report_csv(
        out_dir / "iterations.csv",
        digest,
        [
            "iteration",
            "loss_mean",
            "scheduling_events",
            "compute_virtual_mean",
            "sync_virtual",
            "sync_overhead_fraction",
            "compute_wall_mean",
            "compute_wall_max",
            "sync_wall",
        ],
        iteration_rows,
    )


def cmd_train(args) -> int:
    manifest = _manifest_from_args(args)
    try:
        result = train(
            manifest.training_config(),
            manifest.samples(),
            cluster_config=manifest.cluster_config(),
        )
    except Exception as exc:  # noqa: BLE001 - CLI boundary
        print(f"training aborted: {exc}", file=sys.stderr)
        return 1
    write_train_artifacts(result, manifest, Path(args.out))
    final_loss = result.stats[-1].loss_mean if result.stats else float("nan")
    _, mean_overhead = (
        measure_sync_overhead(result.stats) if result.stats else ([], float("nan"))
    )
    print(
        f"trained {manifest.workload}: N={manifest.num_partitions} M={manifest.iterations} "
        f"final_loss={final_loss:.6f} mean_sync_overhead={mean_overhead:.4f}"
    )
    print(f"artifacts in {args.out}")
    return 0


# ----------------------------------------------------------------------
# verify-oracle


@dataclass
class OracleCheck:
    num_partitions: int
    max_abs_diff: float

    @property
    def passed(self) -> bool:
        return self.max_abs_diff <= ORACLE_TOLERANCE


def verify_oracle(manifest: RunManifest, partition_counts: list[int]) -> list[OracleCheck]:
    checks = []
    for n in partition_counts:
        variant = manifest.with_overrides(num_partitions=n)
        result = train(
            variant.training_config(),
            variant.samples(),
            cluster_config=variant.cluster_config(),
        )
        reference = sequential_oracle(variant.training_config(), variant.samples())
        diff = float(np.max(np.abs(result.final_params - reference))) if reference.size else 0.0
        checks.append(OracleCheck(n, diff))
    return checks


def cmd_verify_oracle(args) -> int:
    manifest = _manifest_from_args(args)
    if args.iterations is not None:
        manifest = manifest.with_overrides(iterations=args.iterations)
    counts = _int_list(args.partitions)
    checks = verify_oracle(manifest, counts)
    for check in checks:
        status = "ok" if check.passed else "FAIL"
        print(f"N={check.num_partitions}: max_abs_diff={check.max_abs_diff:.3e} {status}")
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        write_report_csv(
            out / "verify_oracle.csv",
            manifest.digest(),
            ["num_partitions", "max_abs_diff", "passed"],
            [
                {
                    "num_partitions": c.num_partitions,
                    "max_abs_diff": repr(c.max_abs_diff),
                    "passed": c.passed,
                }
                for c in checks
            ],
        )
    failed = [c for c in checks if not c.passed]
    if failed:
        worst = max(failed, key=lambda c: c.max_abs_diff)
        print(
            f"oracle mismatch at N={worst.num_partitions}: {worst.max_abs_diff:.3e} "
            f"> {ORACLE_TOLERANCE:.0e}",
            file=sys.stderr,
        )
        return 1
    return 0


# ----------------------------------------------------------------------
# bench-comm


def bench_comm(k_values: list[int], n_values: list[int], seed: int = 0) -> list[dict]:
    """One measured training iteration per (K, N) against the closed-form
    per-node volume 2*(N-1)/N*K*8 bytes per direction.

    Totals must match exactly.  Individual nodes match exactly iff N
    divides K (otherwise the one-element slice imbalance moves a few bytes
    between nodes while the total is unchanged).
    """
    rows = []
    for k in k_values:
        workload = dummy_comm_workload(k)
        for n in n_values:
            config = TrainingConfig(
                num_partitions=n,
                iterations=2,
                batch_size=4,
                learning_rate=1e-3,
                seed=seed,
                model_spec=workload.model_spec,
                loss=workload.loss,
            )
            result = train(config, workload.make_samples(seed))
            # iteration 0's traffic: its gradient shuffle plus its weight
            # broadcast (read by iteration 1's forward-backward tasks)
            per_node_in = []
            per_node_out = []
            for node in range(n):
                inbound, outbound = result.network.node_phase_bytes(node, iteration=0)
                per_node_in.append(inbound)
                per_node_out.append(outbound)
            predicted_total = 2 * k * (n - 1) * 8
            measured_in = sum(per_node_in)
            measured_out = sum(per_node_out)
            uniform = k % n == 0
            per_node_exact = all(v * n == predicted_total for v in per_node_in + per_node_out)
            rows.append(
                {
                    "k": k,
                    "n": n,
                    "measured_out_total": measured_out,
                    "measured_in_total": measured_in,
                    "predicted_total": predicted_total,
                    "per_node_bytes": repr(predicted_total / n),
                    "ring_allreduce_per_node_bytes": repr(2 * (n - 1) / n * k * 8),
                    "uniform_slices": uniform,
                    "per_node_exact": per_node_exact,
                    "ok": measured_in == predicted_total
                    and measured_out == predicted_total
                    and (per_node_exact or not uniform),
                }
            )
    return rows


def cmd_bench_comm(args) -> int:
    k_values = _int_list(args.k_values)
    n_values = _int_list(args.n_values)
    rows = bench_comm(k_values, n_values, seed=args.seed)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    digest = f"bench-comm-k{args.k_values}-n{args.n_values}-s{args.seed}"
    write_report_csv(out / "bench_comm.csv", digest, list(rows[0].keys()), rows)
    bad = [r for r in rows if not r["ok"]]
    for r in rows:
        print(
            f"K={r['k']} N={r['n']}: per-node/direction {r['per_node_bytes']} bytes "
            f"({'exact per node' if r['per_node_exact'] else 'exact in total'})"
        )
    if bad:
        for r in bad:
            print(
                f"MISMATCH K={r['k']} N={r['n']}: measured out={r['measured_out_total']} "
                f"in={r['measured_in_total']} predicted={r['predicted_total']}",
                file=sys.stderr,
            )
        return 1
    return 0


# ----------------------------------------------------------------------
# bench-sched


def cmd_bench_sched(args) -> int:
    task_counts = _int_list(args.task_counts)
    group_sizes = _int_list(args.group_sizes)
    rows = run_schedule_sweep(task_counts, args.schedule_cost, args.compute_time, group_sizes)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    digest = f"bench-sched-t{args.task_counts}-g{args.group_sizes}"
    write_report_csv(
        out / "bench_sched.csv",
        digest,
        [
            "task_count",
            "group_size",
            "schedule_cost",
            "compute_time",
            "scheduling_overhead",
            "overhead_fraction",
            "scheduling_events",
        ],
        [
            {
                "task_count": r.task_count,
                "group_size": r.group_size,
                "schedule_cost": repr(r.schedule_cost),
                "compute_time": repr(r.compute_time),
                "scheduling_overhead": repr(r.scheduling_overhead),
                "overhead_fraction": repr(r.overhead_fraction),
                "scheduling_events": r.scheduling_events,
            }
            for r in rows
        ],
    )
    for r in rows:
        print(
            f"tasks={r.task_count} G={r.group_size}: overhead_fraction={r.overhead_fraction:.4f} "
            f"events/iter={r.scheduling_events}"
        )
    # monotonicity: growing in task count at fixed G, shrinking in G at
    # fixed task count
    by_group: dict[int, list] = {}
    for r in rows:
        by_group.setdefault(r.group_size, []).append(r)
    for group_rows in by_group.values():
        ordered = sorted(group_rows, key=lambda r: r.task_count)
        fractions = [r.overhead_fraction for r in ordered]
        if fractions != sorted(fractions):
            print("monotonicity violation: overhead not increasing in task count", file=sys.stderr)
            return 1
    by_count: dict[int, list] = {}
    for r in rows:
        by_count.setdefault(r.task_count, []).append(r)
    for count_rows in by_count.values():
        ordered = sorted(count_rows, key=lambda r: r.group_size)
        fractions = [r.overhead_fraction for r in ordered]
        if fractions != sorted(fractions, reverse=True):
            print("monotonicity violation: overhead not decreasing in group size", file=sys.stderr)
            return 1
    return 0


# ----------------------------------------------------------------------
# fault-drill


@dataclass
class DrillOutcome:
    fault: FaultSpec
    params_identical: bool
    store_identical: bool
    retries: int
    first_difference: str | None

    @property
    def passed(self) -> bool:
        return self.params_identical and self.store_identical


def default_fault_matrix(manifest: RunManifest) -> list[FaultSpec]:
    """Eight cases: both job kinds x both kill modes x first/last task."""
    n = manifest.num_partitions
    iteration = manifest.iterations // 2
    return [
        FaultSpec(iteration, job_kind, task_id, mode)
        for job_kind in (JobKind.FORWARD_BACKWARD, JobKind.PARAMETER_SYNC)
        for mode in (FaultMode.KILL_BEFORE_EFFECTS, FaultMode.KILL_AFTER_PARTIAL_PUT)
        for task_id in (0, n - 1)
    ]


def fault_drill(manifest: RunManifest, faults: list[FaultSpec] | None = None) -> list[DrillOutcome]:
    if faults is None:
        faults = default_fault_matrix(manifest)
    config = manifest.training_config()
    samples = manifest.samples()
    baseline = train(config, samples, cluster_config=manifest.cluster_config())
    baseline_store = baseline.store.snapshot()

    outcomes = []
    for fault in faults:
        result = train(config, samples, cluster_config=manifest.cluster_config([fault]))
        params_same = (
            result.final_params.shape == baseline.final_params.shape
            and bool(np.all(result.final_params == baseline.final_params))
        )
        store = result.store.snapshot()
        first_diff = None
        store_same = store.keys() == baseline_store.keys()
        if not store_same:
            extra = set(store) ^ set(baseline_store)
            first_diff = sorted(b.label() for b in extra)[0]
        else:
            for bid in sorted(baseline_store, key=lambda b: b.label()):
                if store[bid] != baseline_store[bid]:
                    store_same = False
                    first_diff = bid.label()
                    break
        retries = len(result.events.of_kind("task_killed"))
        outcomes.append(DrillOutcome(fault, params_same, store_same, retries, first_diff))
    return outcomes


def cmd_fault_drill(args) -> int:
    manifest = _manifest_from_args(args)
    outcomes = fault_drill(manifest)
    rows = []
    for o in outcomes:
        print(
            f"iter={o.fault.iteration} job={o.fault.job_kind.value} task={o.fault.task_id} "
            f"mode={o.fault.mode.value}: retries={o.retries} "
            f"{'identical' if o.passed else 'DIVERGED at ' + str(o.first_difference)}"
        )
        rows.append(
            {
                "iteration": o.fault.iteration,
                "job_kind": o.fault.job_kind.value,
                "task_id": o.fault.task_id,
                "mode": o.fault.mode.value,
                "retries": o.retries,
                "params_identical": o.params_identical,
                "store_identical": o.store_identical,
            }
        )
    if args.out:
        out = Path(args.out)
        out.mkdir(parents=True, exist_ok=True)
        write_report_csv(out / "fault_drill.csv", manifest.digest(), list(rows[0].keys()), rows)
    if any(not o.passed for o in outcomes):
        return 1
    return 0


# ----------------------------------------------------------------------
# argument plumbing


def _int_list(text: str) -> list[int]:
    return [int(part) for part in text.split(",") if part.strip()]


def _manifest_from_args(args) -> RunManifest:
    manifest = load_manifest(args.manifest)
    if getattr(args, "seed_override", None) is not None:
        manifest = manifest.with_overrides(seed=args.seed_override)
    return manifest


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="slicetrain",
        description="synchronous data-parallel training on a simulated cluster",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_train = sub.add_parser("train", help="run a training manifest, write artifacts")
    p_train.add_argument("--manifest", required=True)
    p_train.add_argument("--out", required=True)
    p_train.add_argument("--seed-override", type=int, dest="seed_override")
    p_train.set_defaults(fn=cmd_train)

    p_verify = sub.add_parser(
        "verify-oracle", help="compare distributed training against the sequential reference"
    )
    p_verify.add_argument("--manifest", required=True)
    p_verify.add_argument("--partitions", default="1,2,4,8")
    p_verify.add_argument("--iterations", type=int, default=None)
    p_verify.add_argument("--out", default=None)
    p_verify.add_argument("--seed-override", type=int, dest="seed_override")
    p_verify.set_defaults(fn=cmd_verify_oracle)

    p_comm = sub.add_parser("bench-comm", help="check per-node communication volume")
    p_comm.add_argument("--k-values", default="100,1000,100000")
    p_comm.add_argument("--n-values", default="2,4,8,16")
    p_comm.add_argument("--seed", type=int, default=0)
    p_comm.add_argument("--out", required=True)
    p_comm.set_defaults(fn=cmd_bench_comm)

    p_sched = sub.add_parser("bench-sched", help="scheduling overhead sweep")
    p_sched.add_argument("--task-counts", default="100,200,500")
    p_sched.add_argument("--group-sizes", default="1,10")
    p_sched.add_argument("--schedule-cost", type=float, default=1.1e-3)
    p_sched.add_argument("--compute-time", type=float, default=5.0)
    p_sched.add_argument("--out", required=True)
    p_sched.set_defaults(fn=cmd_bench_sched)

    p_drill = sub.add_parser("fault-drill", help="paired fault/no-fault training comparisons")
    p_drill.add_argument("--manifest", required=True)
    p_drill.add_argument("--out", default=None)
    p_drill.add_argument("--seed-override", type=int, dest="seed_override")
    p_drill.set_defaults(fn=cmd_fault_drill)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.fn(args)


if __name__ == "__main__":
    sys.exit(main())
