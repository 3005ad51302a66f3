"""Data-qubit layouts and the placement cost model.

A layout pins every data qubit of every batch member to a distinct
hardware vertex; whatever is left over forms the shared helper zone.
Quality is scored by three terms:

* data_routing  -- extra hops between data qubits that share two-qubit
  gates within a process (0 when every such pair is adjacent)
* separation    -- mean hardware distance between different processes'
  data qubits; larger is better, so it enters the total negatively
* helper_access -- extra hops from each data qubit to the nearest
  helper-zone vertex, weighted by how many helper-touching gates that
  data qubit participates in

total = w.data_routing * routing - w.separation * separation
        + w.helper_access * access

The subtraction makes the score scale-free in one useful sense: scaling
all three weights by the same positive factor rescales every layout's
total identically, so the argmin layout is unchanged.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Mapping

import numpy as np

from ..process import Process
from ..topology import HardwareGraph


class PlacementError(ValueError):
    """Invalid layout or impossible placement request."""


@dataclass(frozen=True)
class CostWeights:
    data_routing: float = 0.5
    separation: float = 0.3
    helper_access: float = 1.0

    def __post_init__(self):
        for name in ("data_routing", "separation", "helper_access"):
            if getattr(self, name) < 0:
                raise PlacementError(f"weight {name} must be non-negative")

    def scaled(self, factor: float) -> "CostWeights":
        return CostWeights(
            self.data_routing * factor,
            self.separation * factor,
            self.helper_access * factor,
        )


@dataclass(frozen=True)
class CostBreakdown:
    data_routing: float
    separation: float
    helper_access: float
    total: float

    def to_json(self) -> dict:
        return {
            "data_routing": self.data_routing,
            "separation": self.separation,
            "helper_access": self.helper_access,
            "total": self.total,
        }


@dataclass(frozen=True)
class Layout:
    """Assignment of each process's data qubits to hardware vertices."""

    num_qubits: int
    assign: Mapping[str, tuple[int, ...]]  # pid -> site per data index

    def __post_init__(self):
        seen: dict[int, str] = {}
        for pid, sites in self.assign.items():
            for s in sites:
                if not (0 <= s < self.num_qubits):
                    raise PlacementError(f"{pid}: site {s} out of range")
                if s in seen:
                    raise PlacementError(
                        f"site {s} assigned to both {seen[s]} and {pid}"
                    )
                seen[s] = pid
        object.__setattr__(self, "assign", dict(self.assign))

    @property
    def helper_zone(self) -> frozenset[int]:
        used = {s for sites in self.assign.values() for s in sites}
        return frozenset(range(self.num_qubits)) - used

    def sites_of(self, pid: str) -> tuple[int, ...]:
        return self.assign[pid]

    def without(self, pid: str) -> "Layout":
        if pid not in self.assign:
            raise PlacementError(f"{pid} not in layout")
        rest = {k: v for k, v in self.assign.items() if k != pid}
        return Layout(self.num_qubits, rest)

    def to_json(self) -> dict:
        return {
            "num_qubits": self.num_qubits,
            "assign": {pid: list(sites) for pid, sites in sorted(self.assign.items())},
        }

    @staticmethod
    def from_json(d: Mapping) -> "Layout":
        return Layout(
            num_qubits=d["num_qubits"],
            assign={pid: tuple(sites) for pid, sites in d["assign"].items()},
        )


@dataclass(frozen=True)
class GateSummary:
    """Per-process gate statistics that the cost terms consume."""

    pair_weights: Mapping[str, Mapping[tuple[int, int], int]]
    helper_weights: Mapping[str, Mapping[int, int]]


def summarize_gates(processes) -> GateSummary:
    pairs: dict[str, dict[tuple[int, int], int]] = {}
    helpers: dict[str, dict[int, int]] = {}
    for p in processes:
        pw: dict[tuple[int, int], int] = {}
        hw: dict[int, int] = {}
        for ins in p.instructions:
            q = ins.quantum_operands
            if len(q) != 2:
                continue
            kinds = {o.kind for o in q}
            if kinds == {"data"}:
                i, j = sorted(o.index for o in q)
                pw[(i, j)] = pw.get((i, j), 0) + 1
            elif kinds == {"data", "helper"}:
                d = next(o for o in q if o.kind == "data").index
                hw[d] = hw.get(d, 0) + 1
            # helper-helper gates route inside the zone; no data site to pull
        pairs[p.id] = pw
        helpers[p.id] = hw
    return GateSummary(pair_weights=pairs, helper_weights=helpers)


def _sites(layout: Layout, p: Process) -> tuple[int, ...]:
    try:
        sites = layout.assign[p.id]
    except KeyError:
        raise PlacementError(f"layout does not place process {p.id}")
    if len(sites) != p.num_data:
        raise PlacementError(
            f"{p.id}: layout has {len(sites)} sites for {p.num_data} data qubits"
        )
    return sites


def data_routing_cost(
    layout: Layout, graph: HardwareGraph, processes, summary: GateSummary | None = None
) -> float:
    """Hops beyond adjacency for intra-process data-data gates."""
    summary = summary or summarize_gates(processes)
    dist = graph.dist
    total = 0
    for p in processes:
        sites = _sites(layout, p)
        for (i, j), w in summary.pair_weights[p.id].items():
            total += w * (int(dist[sites[i], sites[j]]) - 1)
    return float(total)


def separation_score(layout: Layout, graph: HardwareGraph, processes) -> float:
    """Mean over process pairs of mean cross-process data distance."""
    m = len(processes)
    npairs = m * (m - 1) // 2
    if npairs == 0:
        return 0.0
    dist = graph.dist
    site_arrays = [np.asarray(_sites(layout, p), dtype=np.intp) for p in processes]
    acc = 0.0
    for a in range(m):
        for b in range(a + 1, m):
            na, nb = len(site_arrays[a]), len(site_arrays[b])
            if na == 0 or nb == 0:
                continue
            s = int(dist[np.ix_(site_arrays[a], site_arrays[b])].sum(dtype=np.int64))
            acc += s / (na * nb)
    return acc / npairs


def helper_access_cost(
    layout: Layout, graph: HardwareGraph, processes, summary: GateSummary | None = None
) -> float:
    """Hops beyond adjacency from helper-hungry data qubits to the zone."""
    summary = summary or summarize_gates(processes)
    zone = sorted(layout.helper_zone)
    dist = graph.dist
    total = 0
    for p in processes:
        hw = summary.helper_weights[p.id]
        if not hw:
            continue
        if not zone:
            raise PlacementError(
                f"{p.id} needs helper access but the layout leaves no free vertex"
            )
        sites = _sites(layout, p)
        for idx, w in hw.items():
            dmin = min(int(dist[sites[idx], h]) for h in zone)
            total += w * (dmin - 1)
    return float(total)


def total_cost(
    layout: Layout,
    graph: HardwareGraph,
    processes,
    weights: CostWeights = CostWeights(),
    summary: GateSummary | None = None,
) -> CostBreakdown:
    summary = summary or summarize_gates(processes)
    routing = data_routing_cost(layout, graph, processes, summary)
    separation = separation_score(layout, graph, processes)
    access = helper_access_cost(layout, graph, processes, summary)
    total = (
        weights.data_routing * routing
        - weights.separation * separation
        + weights.helper_access * access
    )
    return CostBreakdown(routing, separation, access, total)


def initial_layout(graph: HardwareGraph, processes, seed: int = 0) -> Layout:
    """Greedy contiguous clusters, largest process first.

    Each process grows a BFS cluster from a seed vertex chosen to be as
    far as possible from everything already placed; ties break by seeded
    RNG so restarts explore different corners.
    """
    need = {p.id: p.num_data for p in processes}
    if sum(need.values()) > graph.num_qubits:
        raise PlacementError(
            f"batch needs {sum(need.values())} sites on {graph.num_qubits} qubits"
        )
    ids = [p.id for p in processes]
    if len(set(ids)) != len(ids):
        raise PlacementError("duplicate process ids in batch")
    rng = np.random.default_rng(seed)
    order = sorted(processes, key=lambda p: -need[p.id])
    occupied: set[int] = set()
    assign: dict[str, tuple[int, ...]] = {}
    for p in order:
        k = need[p.id]
        if k == 0:
            assign[p.id] = ()
            continue
        cluster = _grow_cluster(graph, occupied, k, rng)
        occupied.update(cluster)
        assign[p.id] = tuple(cluster)
    return Layout(graph.num_qubits, {pid: assign[pid] for pid in ids})


def carve_private_pools(
    layout: Layout, graph: HardwareGraph, processes
) -> dict[str, tuple[int, ...]]:
    """Split the helper zone into exclusive per-process regions.

    No-sharing mode: each process receives num_helper free vertices,
    nearest-first relative to its own data sites, claimed in batch
    order.  Requires the batch to have been admitted with helper
    reservations, so the zone is always large enough.
    """
    remaining = set(layout.helper_zone)
    pools: dict[str, tuple[int, ...]] = {}
    for p in processes:
        if p.num_helper > len(remaining):
            raise PlacementError(
                f"{p.id}: needs {p.num_helper} private helpers, "
                f"only {len(remaining)} free vertices remain"
            )
        sites = _sites(layout, p)
        if sites:
            key = lambda v: (sum(int(graph.dist[v, s]) for s in sites), v)
        else:
            key = lambda v: v
        chosen = sorted(remaining, key=key)[: p.num_helper]
        remaining.difference_update(chosen)
        pools[p.id] = tuple(sorted(chosen))
    return pools


def _grow_cluster(
    graph: HardwareGraph, occupied: set[int], k: int, rng: np.random.Generator
) -> list[int]:
    free = [v for v in range(graph.num_qubits) if v not in occupied]
    if occupied:
        score = {v: min(int(graph.dist[v, o]) for o in occupied) for v in free}
        best = max(score.values())
        candidates = [v for v in free if score[v] == best]
    else:
        candidates = free
    seed_v = candidates[int(rng.integers(len(candidates)))]
    cluster: list[int] = []
    taken = set(occupied)
    visited = {seed_v}
    frontier = deque([seed_v])
    while len(cluster) < k:
        if not frontier:
            # fragmented region: hop to the free vertex nearest the cluster
            rest = [v for v in free if v not in visited]
            v = min(rest, key=lambda v: (min(int(graph.dist[v, c]) for c in cluster), v))
            visited.add(v)
            frontier.append(v)
            continue
        v = frontier.popleft()
        cluster.append(v)
        taken.add(v)
        for nb in graph.neighbors(v):
            if nb not in visited and nb not in taken:
                visited.add(nb)
                frontier.append(nb)
    return cluster
