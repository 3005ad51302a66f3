"""Shot-aware batch formation for a shared device.

Jobs queue up with a shot budget; the scheduler repeatedly packs a batch
whose data-qubit demand lands inside an occupancy window, runs it for
the largest shot count every member still needs, and requeues the
leftovers.  Ordering jobs by remaining depth demand (shots x depth)
keeps short-duration jobs from being pinned behind deep ones, which is
where the space-time win over plain FIFO packing comes from.
"""

from __future__ import annotations

from dataclasses import dataclass

from .process import Process


class AdmissionError(ValueError):
    """Process can never run on this device configuration."""


@dataclass(frozen=True)
class SchedulerConfig:
    total_qubits: int
    occupancy_ratio: float = 0.6  # batch fill threshold, fraction of device
    max_shots: int = 8192  # per-batch shot cap
    wait_bound: float = 30.0  # seconds before an under-filled batch is forced out
    reserve_helpers: bool = False  # no-sharing mode: helpers count as demand

    def __post_init__(self):
        if self.total_qubits < 1:
            raise ValueError("total_qubits must be positive")
        if not (0.0 < self.occupancy_ratio <= 1.0):
            raise ValueError("occupancy_ratio must be in (0, 1]")
        if self.max_shots < 1:
            raise ValueError("max_shots must be positive")
        if self.wait_bound < 0:
            raise ValueError("wait_bound must be non-negative")

    def demand(self, process: Process) -> int:
        if self.reserve_helpers:
            return process.num_data + process.num_helper
        return process.num_data


@dataclass
class QueueEntry:
    """A queued job: immutable program plus mutable scheduling state."""

    process: Process
    remaining_shots: int
    ready_time: float  # when the job (re)entered the queue

    @property
    def priority(self) -> tuple:
        # remaining depth demand, then arrival order for stable ties
        return (
            self.remaining_shots * self.process.depth,
            self.process.arrival_time,
            self.process.id,
        )


def admit(process: Process, config: SchedulerConfig, now: float) -> QueueEntry:
    if config.demand(process) >= config.total_qubits:
        raise AdmissionError(
            f"{process.id}: needs {config.demand(process)} qubits but the device "
            f"has {config.total_qubits}; a batch must stay strictly smaller"
        )
    return QueueEntry(process=process, remaining_shots=process.shots, ready_time=now)


def prioritize(entries: list[QueueEntry]) -> list[QueueEntry]:
    """Ascending remaining depth demand: cheap-to-finish jobs first."""
    return sorted(entries, key=lambda e: e.priority)


def fifo_order(entries: list[QueueEntry]) -> list[QueueEntry]:
    return sorted(entries, key=lambda e: (e.process.arrival_time, e.process.id))


@dataclass(frozen=True)
class Batch:
    """One device-wide execution round."""

    entries: tuple[QueueEntry, ...]
    shots: int  # every member runs exactly this many shots
    total_qubits: int
    reason: str  # "threshold" or "timeout"
    formed_at: float

    @property
    def processes(self) -> tuple[Process, ...]:
        return tuple(e.process for e in self.entries)

    @property
    def member_ids(self) -> tuple[str, ...]:
        return tuple(p.id for p in self.processes)

    @property
    def max_depth(self) -> int:
        return max(p.depth for p in self.processes)

    @property
    def makespan(self) -> int:
        # depth slots the whole device is held for
        return self.shots * self.max_depth

    @property
    def work(self) -> int:
        return self.shots * sum(p.num_data * p.depth for p in self.processes)

    @property
    def capacity(self) -> int:
        return self.total_qubits * self.makespan

    def to_json(self) -> dict:
        return {
            "members": list(self.member_ids),
            "shots": self.shots,
            "total_qubits": self.total_qubits,
            "reason": self.reason,
            "formed_at": self.formed_at,
            "max_depth": self.max_depth,
            "makespan": self.makespan,
            "work": self.work,
            "capacity": self.capacity,
        }


def batch_shots(entries: list[QueueEntry], config: SchedulerConfig) -> int:
    return min(config.max_shots, min(e.remaining_shots for e in entries))


def form_batch(
    ordered: list[QueueEntry], config: SchedulerConfig, now: float
) -> Batch | None:
    """Pack jobs in the given order; None means keep waiting.

    First-fit with skip: walk the queue, taking every job that keeps the
    packed data-qubit demand strictly below the device size.  Emit the
    batch once demand reaches the occupancy threshold, or when the
    oldest queued job has waited past the wait bound.
    """
    if not ordered:
        return None
    picked: list[QueueEntry] = []
    total = 0
    for entry in ordered:
        d = config.demand(entry.process)
        if total + d < config.total_qubits:
            picked.append(entry)
            total += d
    if not picked:
        return None
    threshold = config.occupancy_ratio * config.total_qubits
    if total >= threshold:
        reason = "threshold"
    elif now >= min(e.ready_time for e in ordered) + config.wait_bound:
        # written as ready + bound <= now so that callers advancing a clock
        # to exactly that sum see the timeout fire despite float rounding
        reason = "timeout"
    else:
        return None
    return Batch(
        entries=tuple(picked),
        shots=batch_shots(picked, config),
        total_qubits=config.total_qubits,
        reason=reason,
        formed_at=now,
    )


def reduce_batch(batch: Batch, keep_ids, config: SchedulerConfig) -> Batch | None:
    """Drop evicted members and recompute the shot count."""
    keep = [e for e in batch.entries if e.process.id in set(keep_ids)]
    if not keep:
        return None
    return Batch(
        entries=tuple(keep),
        shots=batch_shots(keep, config),
        total_qubits=batch.total_qubits,
        reason=batch.reason,
        formed_at=batch.formed_at,
    )


def settle_batch(
    batch: Batch, queue: list[QueueEntry], now: float
) -> tuple[list[QueueEntry], list[QueueEntry]]:
    """Charge executed shots; returns (finished, still_queued)."""
    finished = []
    in_batch = set(map(id, batch.entries))
    for entry in batch.entries:
        entry.remaining_shots -= batch.shots
        if entry.remaining_shots < 0:
            raise ValueError(f"{entry.process.id}: executed more shots than remained")
        if entry.remaining_shots == 0:
            finished.append(entry)
        else:
            entry.ready_time = now  # wait clock restarts after a partial run
    still = [
        e
        for e in queue
        if not (id(e) in in_batch and e.remaining_shots == 0)
    ]
    return finished, still


def space_time_utility(batches: list[Batch]) -> float | None:
    """Executed work volume over reserved capacity; None when no batches ran."""
    if not batches:
        return None
    cap = sum(b.capacity for b in batches)
    if cap == 0:
        return None
    return sum(b.work for b in batches) / cap
