"""Simulated-annealing driver over the placement cost model.

The driver owns everything non-numeric: flattening the batch into
instance arrays, drawing the random streams, calibrating the starting
temperature, and reassembling Layout objects from kernel output.  The
kernels (compiled or pure Python) only consume pre-drawn randomness, so
the two backends walk identical trajectories.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..topology import HardwareGraph
from ._backend import get_backend
from .layout import (
    CostBreakdown,
    CostWeights,
    Layout,
    PlacementError,
    initial_layout,
    summarize_gates,
    total_cost,
)

_PROBE_ROWS = 100


@dataclass(frozen=True)
class AnnealParams:
    iterations: int = 30
    moves_per_iteration: int | None = None  # default: 200 x data qubits in batch
    t0: float | None = None  # None: calibrate from a probe of uphill deltas
    cooling: float = 0.95
    seed: int = 0
    restarts: int = 1

    def __post_init__(self):
        if self.iterations < 0 or self.restarts < 1:
            raise PlacementError("iterations must be >= 0 and restarts >= 1")
        if self.moves_per_iteration is not None and self.moves_per_iteration < 1:
            raise PlacementError("moves_per_iteration must be positive")
        if not (0.0 < self.cooling <= 1.0):
            raise PlacementError("cooling must be in (0, 1]")
        if self.t0 is not None and self.t0 <= 0:
            raise PlacementError("t0 must be positive")


@dataclass(frozen=True)
class AnnealResult:
    layout: Layout
    breakdown: CostBreakdown
    start_layout: Layout
    start_cost: float
    trace: tuple[float, ...]
    accepted: int
    proposed: int
    t0: float
    backend: str
    seed: int


def _flatten(graph: HardwareGraph, processes, layout: Layout):
    """Slot arrays for the kernels; slot order is batch order, data index order."""
    summary = summarize_gates(processes)
    slot_of: dict[tuple[str, int], int] = {}
    proc_start = [0]
    sites = []
    for p in processes:
        for i in range(p.num_data):
            slot_of[(p.id, i)] = len(sites)
            sites.append(layout.assign[p.id][i])
        proc_start.append(len(sites))
    nslots = len(sites)
    rows: list[list[tuple[int, int]]] = [[] for _ in range(nslots)]
    hw = np.zeros(nslots, dtype=np.int64)
    for p in processes:
        for (i, j), w in summary.pair_weights[p.id].items():
            u, v = slot_of[(p.id, i)], slot_of[(p.id, j)]
            rows[u].append((v, w))
            rows[v].append((u, w))
        for i, w in summary.helper_weights[p.id].items():
            hw[slot_of[(p.id, i)]] += w
    gate_indptr = np.zeros(nslots + 1, dtype=np.int32)
    for u, row in enumerate(rows):
        gate_indptr[u + 1] = gate_indptr[u] + len(row)
    gate_slots = np.empty(int(gate_indptr[-1]), dtype=np.int32)
    gate_wts = np.empty(int(gate_indptr[-1]), dtype=np.int64)
    k = 0
    for row in rows:
        for v, w in row:
            gate_slots[k] = v
            gate_wts[k] = w
            k += 1
    adj_indptr, adj_indices = graph.adjacency_csr()
    return {
        "dist": graph.dist,
        "adj_indptr": adj_indptr,
        "adj_indices": adj_indices,
        "proc_start": np.asarray(proc_start, dtype=np.int32),
        "sites0": np.asarray(sites, dtype=np.int32),
        "gate_indptr": gate_indptr,
        "gate_slots": gate_slots,
        "gate_wts": gate_wts,
        "hw": hw,
    }


def _unflatten(processes, slot_sites: np.ndarray, num_qubits: int) -> Layout:
    assign = {}
    k = 0
    for p in processes:
        assign[p.id] = tuple(int(slot_sites[k + i]) for i in range(p.num_data))
        k += p.num_data
    return Layout(num_qubits, assign)


def _calibrate_t0(backend, instance, weights, probe_u) -> float:
    """Median uphill delta scaled so a median move starts ~50% acceptable."""
    deltas = backend.probe(
        **instance,
        alpha=weights.data_routing,
        beta=weights.separation,
        gamma=weights.helper_access,
        uniforms=probe_u,
    )
    uphill = deltas[np.isfinite(deltas) & (deltas > 0)]
    if len(uphill) == 0:
        return 1.0
    t0 = float(np.median(uphill)) / math.log(2.0)
    return t0 if t0 > 0 else 1.0


def anneal(
    graph: HardwareGraph,
    processes,
    weights: CostWeights = CostWeights(),
    params: AnnealParams = AnnealParams(),
    start: Layout | None = None,
    backend: str | None = None,
) -> AnnealResult:
    """Anneal one batch; deterministic in params.seed, identical across backends."""
    processes = list(processes)
    if not processes:
        raise PlacementError("cannot place an empty batch")
    impl = get_backend(backend)
    if start is None:
        start = initial_layout(graph, processes, seed=params.seed)
    nslots = sum(p.num_data for p in processes)
    summary = summarize_gates(processes)
    needs_zone = any(summary.helper_weights[p.id] for p in processes)
    if nslots == graph.num_qubits and needs_zone:
        raise PlacementError("no free vertex left for helper traffic")
    start_bd = total_cost(start, graph, processes, weights, summary)
    moves = params.moves_per_iteration or max(1, 200 * nslots)
    total_moves = params.iterations * moves
    # degenerate cases the kernels should never see
    if nslots == 0 or total_moves == 0 or nslots == graph.num_qubits:
        return AnnealResult(
            layout=start,
            breakdown=start_bd,
            start_layout=start,
            start_cost=start_bd.total,
            trace=(start_bd.total,),
            accepted=0,
            proposed=0,
            t0=params.t0 or 0.0,
            backend=impl.BACKEND_NAME,
            seed=params.seed,
        )
    instance = _flatten(graph, processes, start)
    rng = np.random.default_rng(np.random.SeedSequence([params.seed, 0x5A]))
    # the probe stream is always drawn, keeping trajectories comparable
    # whether t0 was calibrated or pinned
    probe_u = rng.random((_PROBE_ROWS, 4))
    uniforms = rng.random((total_moves, 4))
    logu = np.log(rng.random(total_moves))
    t0 = params.t0
    if t0 is None:
        t0 = _calibrate_t0(impl, instance, weights, probe_u)
    out = impl.run(
        **instance,
        alpha=weights.data_routing,
        beta=weights.separation,
        gamma=weights.helper_access,
        t0=t0,
        cooling=params.cooling,
        iterations=params.iterations,
        moves_per_iter=moves,
        uniforms=uniforms,
        logu=logu,
    )
    best_layout = _unflatten(processes, out["best_sites"], graph.num_qubits)
    breakdown = total_cost(best_layout, graph, processes, weights, summary)
    if not math.isclose(breakdown.total, out["best_cost"], rel_tol=1e-9, abs_tol=1e-9):
        raise PlacementError(
            f"kernel cost {out['best_cost']} disagrees with reference "
            f"{breakdown.total}; kernel state is corrupt"
        )
    return AnnealResult(
        layout=best_layout,
        breakdown=breakdown,
        start_layout=start,
        start_cost=start_bd.total,
        trace=tuple(float(x) for x in out["trace"]),
        accepted=int(out["accepted"]),
        proposed=int(out["proposed"]),
        t0=t0,
        backend=impl.BACKEND_NAME,
        seed=params.seed,
    )


def place_batch(
    graph: HardwareGraph,
    processes,
    weights: CostWeights = CostWeights(),
    params: AnnealParams = AnnealParams(),
    backend: str | None = None,
) -> AnnealResult:
    """Anneal with restarts; best total wins, earliest seed breaks ties."""
    best: AnnealResult | None = None
    for k in range(params.restarts):
        r = anneal(
            graph,
            processes,
            weights,
            AnnealParams(
                iterations=params.iterations,
                moves_per_iteration=params.moves_per_iteration,
                t0=params.t0,
                cooling=params.cooling,
                seed=params.seed + k,
                restarts=1,
            ),
            backend=backend,
        )
        if best is None or r.breakdown.total < best.breakdown.total:
            best = r
    return best
