"""Event-driven simulation of the whole pipeline on one device.

Jobs arrive over time, wait in a queue, get packed into batches, placed
on the hardware graph, devirtualized into one instruction stream, and
charged for the shots they executed.  Every stage is deterministic given
the inputs, so a run can be replayed byte-for-byte from its artifacts.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field, replace

from .batching import (
    AdmissionError,
    Batch,
    QueueEntry,
    SchedulerConfig,
    admit,
    fifo_order,
    form_batch,
    prioritize,
    reduce_batch,
    settle_batch,
)
from .devirtualize import ScheduledProgram, schedule_with_recovery
from .metrics import (
    BatchMetrics,
    MetricsReport,
    helper_cost_ratio,
    share_ratio,
    space_utilization,
)
from .placement.annealer import AnnealParams, place_batch
from .placement.layout import (
    CostBreakdown,
    CostWeights,
    carve_private_pools,
    total_cost,
)
from .topology import HardwareGraph
from .workload import WorkloadSpec, generate_workload


class HarnessError(RuntimeError):
    pass


@dataclass(frozen=True)
class RunConfig:
    """Knobs for one simulated run.

    sharing=False reserves each job's helpers up front and fences them
    into private pools; shot_aware=False falls back to arrival-order
    batching.  Together they form the ablation grid.
    """

    occupancy_ratio: float = 0.6
    max_shots: int = 8192
    wait_bound: float = 30.0
    sharing: bool = True
    shot_aware: bool = True
    depth_time: float = 0.001  # simulated seconds per depth layer per shot
    weights: CostWeights = field(default_factory=CostWeights)
    anneal: AnnealParams = field(default_factory=AnnealParams)
    backend: str | None = None  # placement kernel; None = best available
    seed_stride: int = 1009  # placement seed spacing between batches
    max_events: int = 100_000

    def scheduler_config(self, total_qubits: int) -> SchedulerConfig:
        return SchedulerConfig(
            total_qubits=total_qubits,
            occupancy_ratio=self.occupancy_ratio,
            max_shots=self.max_shots,
            wait_bound=self.wait_bound,
            reserve_helpers=not self.sharing,
        )

    def to_json(self) -> dict:
        return {
            "occupancy_ratio": self.occupancy_ratio,
            "max_shots": self.max_shots,
            "wait_bound": self.wait_bound,
            "sharing": self.sharing,
            "shot_aware": self.shot_aware,
            "depth_time": self.depth_time,
            "weights": {
                "data_routing": self.weights.data_routing,
                "separation": self.weights.separation,
                "helper_access": self.weights.helper_access,
            },
            "anneal": {
                "iterations": self.anneal.iterations,
                "moves_per_iteration": self.anneal.moves_per_iteration,
                "t0": self.anneal.t0,
                "cooling": self.anneal.cooling,
                "seed": self.anneal.seed,
                "restarts": self.anneal.restarts,
            },
            "backend": self.backend,
            "seed_stride": self.seed_stride,
        }


@dataclass(frozen=True)
class BatchOutcome:
    """Everything one executed batch produced."""

    index: int
    batch: Batch  # survivors only, shots as charged
    program: ScheduledProgram
    breakdown: CostBreakdown
    evicted: tuple[str, ...]
    started_at: float
    wall_time: float
    backend: str

    def to_json(self) -> dict:
        return {
            "index": self.index,
            "batch": self.batch.to_json(),
            "layout": self.program.layout.to_json(),
            "pools": (
                {k: list(v) for k, v in sorted(self.program.pools.items())}
                if self.program.pools is not None
                else None
            ),
            "breakdown": self.breakdown.to_json(),
            "evicted": list(self.evicted),
            "started_at": self.started_at,
            "wall_time": self.wall_time,
            "backend": self.backend,
        }


@dataclass(frozen=True)
class RunResult:
    config: RunConfig
    topology: str
    report: MetricsReport
    outcomes: tuple[BatchOutcome, ...]
    completed_ids: tuple[str, ...]
    dropped: tuple[tuple[str, str], ...]  # (process id, reason)


def run(
    processes,
    graph: HardwareGraph,
    config: RunConfig = RunConfig(),
    out_dir: str | None = None,
) -> RunResult:
    """Simulate the full lifecycle of a job list on one device."""
    jobs = sorted(processes, key=lambda p: (p.arrival_time, p.id))
    scfg = config.scheduler_config(graph.num_qubits)

    pending = list(jobs)
    queue: list[QueueEntry] = []
    clock = 0.0
    outcomes: list[BatchOutcome] = []
    completed: list[str] = []
    dropped: list[tuple[str, str]] = []
    rows: list[BatchMetrics] = []

    for _ in range(config.max_events):
        while pending and pending[0].arrival_time <= clock:
            p = pending.pop(0)
            try:
                # ready from the moment it arrived, even if the device was busy
                queue.append(admit(p, scfg, p.arrival_time))
            except AdmissionError as exc:
                dropped.append((p.id, str(exc)))
        if not queue:
            if not pending:
                break
            clock = pending[0].arrival_time
            continue

        ordered = prioritize(queue) if config.shot_aware else fifo_order(queue)
        batch = form_batch(ordered, scfg, clock)
        if batch is None:
            timeout_at = min(e.ready_time for e in queue) + config.wait_bound
            next_arrival = pending[0].arrival_time if pending else float("inf")
            nxt = min(timeout_at, next_arrival)
            if nxt <= clock:
                raise HarnessError("simulation clock failed to advance")
            clock = nxt
            continue

        members = list(batch.processes)
        params = replace(
            config.anneal, seed=config.anneal.seed + len(outcomes) * config.seed_stride
        )
        placed = place_batch(graph, members, config.weights, params, config.backend)
        pools = (
            None
            if config.sharing
            else carve_private_pools(placed.layout, graph, members)
        )
        program, evicted = schedule_with_recovery(
            members, placed.layout, graph, pools
        )

        entries_by_id = {e.process.id: e for e in batch.entries}
        if program is None:
            # the last eviction happened with one member left, so that job
            # cannot fit its helpers even alone; abandon it and give the
            # others another chance
            hopeless = evicted[-1]
            dropped.append((hopeless, "helper demand exceeds the device"))
            queue.remove(entries_by_id[hopeless])
            for pid in evicted:
                if pid != hopeless:
                    entries_by_id[pid].ready_time = clock
            continue
        for pid in evicted:
            entries_by_id[pid].ready_time = clock

        reduced = reduce_batch(batch, program.member_ids, scfg)
        survivors = list(reduced.processes)
        breakdown = total_cost(program.layout, graph, survivors, config.weights)
        wall = reduced.shots * reduced.max_depth * config.depth_time
        started = clock
        clock += wall
        finished, queue = settle_batch(reduced, queue, clock)
        completed.extend(e.process.id for e in finished)

        outcomes.append(
            BatchOutcome(
                index=len(outcomes),
                batch=reduced,
                program=program,
                breakdown=breakdown,
                evicted=tuple(evicted),
                started_at=started,
                wall_time=wall,
                backend=placed.backend,
            )
        )
        rows.append(
            BatchMetrics(
                index=len(rows),
                members=reduced.member_ids,
                shots=reduced.shots,
                work=float(reduced.work),
                capacity=float(reduced.capacity),
                space_utilization=space_utilization(program, graph.num_qubits),
                share_ratio=share_ratio(program),
                helper_cost_ratio=helper_cost_ratio(breakdown),
                wall_time=wall,
            )
        )
    else:
        raise HarnessError(f"no quiescence within {config.max_events} events")

    report = MetricsReport(
        batches=tuple(rows),
        completed=len(completed),
        dropped=tuple(pid for pid, _ in dropped),
        total_time=clock,
        occupancy_ratio=config.occupancy_ratio,
    )
    result = RunResult(
        config=config,
        topology=graph.name,
        report=report,
        outcomes=tuple(outcomes),
        completed_ids=tuple(completed),
        dropped=tuple(dropped),
    )
    if out_dir is not None:
        write_artifacts(result, out_dir)
    return result


def _dump(path: str, payload: dict) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def write_artifacts(result: RunResult, out_dir: str) -> None:
    """Byte-stable on-disk record: manifest, per-batch files, report, CSV."""
    os.makedirs(out_dir, exist_ok=True)
    os.makedirs(os.path.join(out_dir, "batches"), exist_ok=True)
    os.makedirs(os.path.join(out_dir, "streams"), exist_ok=True)
    for o in result.outcomes:
        _dump(os.path.join(out_dir, "batches", f"{o.index:03d}.json"), o.to_json())
        stream = os.path.join(out_dir, "streams", f"{o.index:03d}.txt")
        with open(stream, "w", encoding="utf-8") as fh:
            fh.write(o.program.to_text())
    _dump(os.path.join(out_dir, "report.json"), result.report.to_json())
    with open(os.path.join(out_dir, "metrics.csv"), "w", encoding="utf-8") as fh:
        fh.write(result.report.to_csv())
    _dump(
        os.path.join(out_dir, "manifest.json"),
        {
            "schema": 1,
            "kind": "run",
            "topology": result.topology,
            "config": result.config.to_json(),
            "num_batches": len(result.outcomes),
            "completed": list(result.completed_ids),
            "dropped": [[pid, why] for pid, why in result.dropped],
            "files": {
                "report": "report.json",
                "metrics": "metrics.csv",
                "batches": [f"batches/{o.index:03d}.json" for o in result.outcomes],
                "streams": [f"streams/{o.index:03d}.txt" for o in result.outcomes],
            },
        },
    )


POLICY_GRID = (
    ("shared+shotaware", True, True),
    ("shared+fifo", True, False),
    ("private+shotaware", False, True),
    ("private+fifo", False, False),
)


def ablation_sweep(
    spec: WorkloadSpec,
    graph: HardwareGraph,
    lambdas=(0.2, 0.4, 0.6),
    policies=POLICY_GRID,
    config: RunConfig = RunConfig(),
) -> list[dict]:
    """Cross occupancy thresholds with scheduling policies.

    One seeded workload is generated once and replayed through every
    (threshold, policy) cell, so rows differ only by scheduler behavior.
    """
    for lam in lambdas:
        if not (0.0 < lam <= 1.0):
            raise ValueError(f"occupancy ratio {lam} outside (0, 1]")
    jobs = generate_workload(spec)
    rows = []
    for lam in lambdas:
        for label, sharing, shot_aware in policies:
            cfg = replace(
                config,
                occupancy_ratio=lam,
                sharing=sharing,
                shot_aware=shot_aware,
            )
            res = run(jobs, graph, cfg)
            rep = res.report
            has_batches = bool(rep.batches)
            rows.append(
                {
                    "occupancy_ratio": lam,
                    "policy": label,
                    "sharing": sharing,
                    "shot_aware": shot_aware,
                    "num_batches": len(rep.batches),
                    "processes_per_batch": (
                        rep.processes_per_batch if has_batches else 0.0
                    ),
                    "space_time_utility": (
                        rep.space_time_utility if has_batches else 0.0
                    ),
                    "mean_space_utilization": (
                        rep.mean_space_utilization if has_batches else 0.0
                    ),
                    "mean_share_ratio": (
                        rep.mean_share_ratio if has_batches else 0.0
                    ),
                    "completed": rep.completed,
                    "dropped": len(rep.dropped),
                    "total_time": rep.total_time,
                }
            )
    return rows


def sweep_csv(rows: list[dict]) -> str:
    if not rows:
        return ""
    import csv
    import io

    buf = io.StringIO()
    writer = csv.DictWriter(buf, fieldnames=list(rows[0].keys()))
    writer.writeheader()
    writer.writerows(rows)
    return buf.getvalue()
