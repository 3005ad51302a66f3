"""Run-quality measurements: hardware usage, tenant sharing, output fidelity.

Everything here is a pure function of finished artifacts (scheduled
streams, cost breakdowns, batch records), so the same numbers come out
of a live run and a replay of its files.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Mapping

from .devirtualize import SYSTEM_OWNER, ScheduledProgram
from .placement.layout import CostBreakdown


class MetricsError(ValueError):
    pass


def space_utilization(sp: ScheduledProgram, total_qubits: int) -> float:
    """Fraction of the device touched by tenant instructions.

    System resets are bookkeeping, not useful work, so they do not count
    a vertex as used.
    """
    if total_qubits <= 0:
        raise MetricsError("total_qubits must be positive")
    return len(sp.touched_sites) / total_qubits


def share_ratio(sp: ScheduledProgram) -> float:
    """Fraction of the free zone serving two or more distinct tenants.

    A vertex counts as shared when helpers from different processes were
    bound to it during the run.  Private-pool runs therefore always score
    0.  An empty free zone (all vertices hold data) scores 0 as well.
    """
    zone = sp.layout.helper_zone
    if not zone:
        return 0.0
    owners_by_site: dict[int, set[str]] = {}
    for e in sp.episodes:
        owners_by_site.setdefault(e.site, set()).add(e.owner)
    shared = sum(
        1 for v in zone if len(owners_by_site.get(v, ())) >= 2
    )
    return shared / len(zone)


def fidelity_l1(
    observed: Mapping[str, float], reference: Mapping[str, float]
) -> float:
    """Distribution overlap: 1 minus half the L1 distance.

    Identical distributions score 1.0, disjoint ones 0.0.  Both inputs
    must be probability distributions (non-negative, summing to 1).
    """
    for name, dist in (("observed", observed), ("reference", reference)):
        total = math.fsum(dist.values())
        if any(v < 0 for v in dist.values()):
            raise MetricsError(f"{name} distribution has a negative entry")
        if not math.isclose(total, 1.0, rel_tol=0.0, abs_tol=1e-9):
            raise MetricsError(f"{name} distribution sums to {total}, not 1")
    keys = set(observed) | set(reference)
    l1 = math.fsum(abs(observed.get(k, 0.0) - reference.get(k, 0.0)) for k in keys)
    return min(1.0, max(0.0, 1.0 - 0.5 * l1))


def helper_cost_ratio(breakdown: CostBreakdown) -> float | None:
    """Share of movement cost spent reaching helpers rather than routing data.

    None when the layout has no movement cost at all (nothing to attribute).
    """
    denom = breakdown.data_routing + breakdown.helper_access
    if denom == 0:
        return None
    return breakdown.helper_access / denom


def processes_per_batch(member_counts) -> float:
    counts = list(member_counts)
    if not counts:
        raise MetricsError("no batches to average over")
    return sum(counts) / len(counts)


@dataclass(frozen=True)
class BatchMetrics:
    """Per-batch measurement row."""

    index: int
    members: tuple[str, ...]
    shots: int
    work: float
    capacity: float
    space_utilization: float
    share_ratio: float
    helper_cost_ratio: float | None
    wall_time: float

    CSV_FIELDS = (
        "index",
        "occupancy_ratio",
        "members",
        "num_processes",
        "shots",
        "work",
        "capacity",
        "eta",
        "space_utilization",
        "share_ratio",
        "helper_cost_ratio",
        "wall_time",
    )

    @property
    def eta(self) -> float:
        """This batch's work volume over the capacity it held."""
        return self.work / self.capacity if self.capacity else 0.0

    def csv_row(self, occupancy_ratio: float | None = None) -> dict:
        return {
            "index": self.index,
            "occupancy_ratio": (
                "" if occupancy_ratio is None else f"{occupancy_ratio:g}"
            ),
            "members": "+".join(self.members),
            "num_processes": len(self.members),
            "shots": self.shots,
            "work": self.work,
            "capacity": self.capacity,
            "eta": f"{self.eta:.6f}",
            "space_utilization": f"{self.space_utilization:.6f}",
            "share_ratio": f"{self.share_ratio:.6f}",
            "helper_cost_ratio": (
                "" if self.helper_cost_ratio is None else f"{self.helper_cost_ratio:.6f}"
            ),
            "wall_time": f"{self.wall_time:.6f}",
        }

    def to_json(self) -> dict:
        return {
            "index": self.index,
            "members": list(self.members),
            "shots": self.shots,
            "work": self.work,
            "capacity": self.capacity,
            "eta": self.eta,
            "space_utilization": self.space_utilization,
            "share_ratio": self.share_ratio,
            "helper_cost_ratio": self.helper_cost_ratio,
            "wall_time": self.wall_time,
        }


@dataclass(frozen=True)
class MetricsReport:
    """Whole-run aggregate over every executed batch."""

    batches: tuple[BatchMetrics, ...]
    completed: int  # jobs that finished all their shots
    dropped: tuple[str, ...]  # jobs abandoned as unschedulable
    total_time: float  # simulated seconds until the last batch finished
    occupancy_ratio: float | None = None  # batch-fill threshold the run used

    @property
    def processes_per_batch(self) -> float:
        return processes_per_batch(len(b.members) for b in self.batches)

    @property
    def space_time_utility(self) -> float:
        """Work actually scheduled over the capacity the batches occupied."""
        cap = sum(b.capacity for b in self.batches)
        if cap == 0:
            raise MetricsError("no capacity recorded")
        return sum(b.work for b in self.batches) / cap

    @property
    def mean_space_utilization(self) -> float:
        if not self.batches:
            raise MetricsError("no batches to average over")
        return sum(b.space_utilization for b in self.batches) / len(self.batches)

    @property
    def mean_share_ratio(self) -> float:
        if not self.batches:
            raise MetricsError("no batches to average over")
        return sum(b.share_ratio for b in self.batches) / len(self.batches)

    @property
    def mean_helper_cost_ratio(self) -> float | None:
        vals = [b.helper_cost_ratio for b in self.batches if b.helper_cost_ratio is not None]
        if not vals:
            return None
        return sum(vals) / len(vals)

    def to_json(self) -> dict:
        return {
            "schema": 1,
            "kind": "metrics_report",
            "num_batches": len(self.batches),
            "completed": self.completed,
            "dropped": list(self.dropped),
            "total_time": self.total_time,
            "occupancy_ratio": self.occupancy_ratio,
            "processes_per_batch": self.processes_per_batch if self.batches else None,
            "space_time_utility": (
                self.space_time_utility if self.batches else None
            ),
            "mean_space_utilization": (
                self.mean_space_utilization if self.batches else None
            ),
            "mean_share_ratio": self.mean_share_ratio if self.batches else None,
            "mean_helper_cost_ratio": self.mean_helper_cost_ratio,
            "batches": [b.to_json() for b in self.batches],
        }

    def to_csv(self) -> str:
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=BatchMetrics.CSV_FIELDS)
        writer.writeheader()
        for b in self.batches:
            writer.writerow(b.csv_row(self.occupancy_ratio))
        return buf.getvalue()
