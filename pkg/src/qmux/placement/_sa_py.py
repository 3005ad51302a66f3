"""Pure-Python annealing kernel (fallback backend).

Mirrors the compiled kernel move for move.  Both backends keep the whole
cost state in exact integer arithmetic (routing hops, per-pair
cross-distance sums, helper-access hops) and only convert to float in
one fixed expression order, so given the same pre-drawn random streams
they produce bit-identical trajectories.

The driver hands in two streams: ``uniforms`` (one row of four uniform
draws per proposal: move type, then three selector draws) and ``logu``
(log of a uniform per proposal, for the Metropolis test).  A proposal is
accepted when delta <= 0 or T * logu < -delta.
"""

from __future__ import annotations

import numpy as np

BACKEND_NAME = "python"

_BIG = 1 << 30  # larger than any hop distance; sentinel for "no second zone vertex"


class _State:
    """Mutable annealing state over the flattened batch instance."""

    def __init__(self, dist, proc_start, sites, gate_indptr, gate_slots, gate_wts, hw):
        self.dist = dist
        self.proc_start = proc_start
        self.sites = sites.copy()
        self.gate_indptr = gate_indptr
        self.gate_slots = gate_slots
        self.gate_wts = gate_wts
        self.hw = hw
        self.n = dist.shape[0]
        self.m = len(proc_start) - 1
        self.S = len(sites)
        self.npairs = self.m * (self.m - 1) // 2
        self.slot_proc = np.empty(self.S, dtype=np.int32)
        for p in range(self.m):
            self.slot_proc[proc_start[p] : proc_start[p + 1]] = p
        self.proc_size = (proc_start[1:] - proc_start[:-1]).astype(np.int64)
        self.swap_procs = np.flatnonzero(self.proc_size >= 2).astype(np.int32)
        self.helper_slots = np.flatnonzero(hw > 0).astype(np.int32)
        self.has_hw = len(self.helper_slots) > 0
        # occupancy: slot index + 1, or 0 when the vertex is free (zone)
        self.occupied = np.zeros(self.n, dtype=np.int32)
        self.occupied[self.sites] = np.arange(1, self.S + 1, dtype=np.int32)
        self.routing = self._init_routing()
        self.cross = self._init_cross()
        self.near1_d = np.empty(self.n, dtype=np.int32)
        self.near1_v = np.empty(self.n, dtype=np.int32)
        self.near2_d = np.empty(self.n, dtype=np.int32)
        self._rebuild_nearest()
        self.access = self._init_access()

    def _init_routing(self) -> int:
        # every gate appears on both endpoints' rows; halve the double count
        total = 0
        for u in range(self.S):
            su = self.sites[u]
            for k in range(self.gate_indptr[u], self.gate_indptr[u + 1]):
                sv = self.sites[self.gate_slots[k]]
                total += int(self.gate_wts[k]) * (int(self.dist[su, sv]) - 1)
        return total // 2

    def _init_cross(self) -> np.ndarray:
        cross = np.zeros((self.m, self.m), dtype=np.int64)
        for a in range(self.m):
            sa = self.sites[self.proc_start[a] : self.proc_start[a + 1]]
            for b in range(a + 1, self.m):
                sb = self.sites[self.proc_start[b] : self.proc_start[b + 1]]
                if len(sa) and len(sb):
                    cross[a, b] = self.dist[np.ix_(sa, sb)].sum(dtype=np.int64)
        return cross

    def _rebuild_nearest(self) -> None:
        zone = np.flatnonzero(self.occupied == 0)
        if len(zone) == 0:
            self.near1_d.fill(_BIG)
            self.near1_v.fill(-1)
            self.near2_d.fill(_BIG)
            return
        block = self.dist[:, zone].astype(np.int32, copy=True)
        first = block.argmin(axis=1)  # first occurrence = lowest zone vertex
        rows = np.arange(self.n)
        self.near1_d[:] = block[rows, first]
        self.near1_v[:] = zone[first]
        if len(zone) == 1:
            self.near2_d.fill(_BIG)
        else:
            block[rows, first] = _BIG
            self.near2_d[:] = block.min(axis=1)

    def _init_access(self) -> int:
        total = 0
        for v in self.helper_slots:
            total += int(self.hw[v]) * (int(self.near1_d[self.sites[v]]) - 1)
        return total

    def cost(self, alpha: float, beta: float, gamma: float) -> float:
        acc = 0.0
        for a in range(self.m):
            na = int(self.proc_size[a])
            for b in range(a + 1, self.m):
                nb = int(self.proc_size[b])
                if na and nb:
                    acc += int(self.cross[a, b]) / (na * nb)
        inter = acc / self.npairs if self.npairs else 0.0
        return alpha * float(self.routing) - beta * inter + gamma * float(self.access)


def _pick(r: float, n: int) -> int:
    i = int(r * n)
    return i if i < n else n - 1


def _eval_swap(st: _State, r1, r2, r3):
    """Exchange two data sites inside one process; zone is untouched."""
    p = int(st.swap_procs[_pick(r1, len(st.swap_procs))])
    base = int(st.proc_start[p])
    sz = int(st.proc_start[p + 1]) - base
    i = _pick(r2, sz)
    j = _pick(r3, sz - 1)
    if j >= i:
        j += 1
    u, v = base + i, base + j
    x, y = int(st.sites[u]), int(st.sites[v])
    d_routing = 0
    for k in range(st.gate_indptr[u], st.gate_indptr[u + 1]):
        w = int(st.gate_slots[k])
        if w == v:
            continue  # the mutual gate's length is unchanged by a swap
        sw = int(st.sites[w])
        d_routing += int(st.gate_wts[k]) * (int(st.dist[y, sw]) - int(st.dist[x, sw]))
    for k in range(st.gate_indptr[v], st.gate_indptr[v + 1]):
        w = int(st.gate_slots[k])
        if w == u:
            continue
        sw = int(st.sites[w])
        d_routing += int(st.gate_wts[k]) * (int(st.dist[x, sw]) - int(st.dist[y, sw]))
    d_access = 0
    if st.has_hw:
        nx = int(st.near1_d[x])
        ny = int(st.near1_d[y])
        d_access += int(st.hw[u]) * (ny - nx)
        d_access += int(st.hw[v]) * (nx - ny)
    return u, v, d_routing, d_access


def _eval_move(st: _State, r1, r2, ds_buf):
    """Relocate one data qubit to an adjacent free vertex (resizes zone)."""
    u = _pick(r1, st.S)
    x = int(st.sites[u])
    start, end = int(st.adj_indptr[x]), int(st.adj_indptr[x + 1])
    deg = end - start
    y = int(st.adj_indices[start + _pick(r2, deg)])
    if st.occupied[y]:
        return None
    p = int(st.slot_proc[u])
    d_routing = 0
    for k in range(st.gate_indptr[u], st.gate_indptr[u + 1]):
        sw = int(st.sites[int(st.gate_slots[k])])
        d_routing += int(st.gate_wts[k]) * (int(st.dist[y, sw]) - int(st.dist[x, sw]))
    d_inter = 0.0
    if st.m > 1:
        shift = st.dist[y, st.sites].astype(np.int64) - st.dist[x, st.sites]
        np_ = int(st.proc_size[p])
        for b in range(st.m):
            if b == p:
                ds_buf[b] = 0
                continue
            lo, hi = int(st.proc_start[b]), int(st.proc_start[b + 1])
            ds = int(shift[lo:hi].sum())
            ds_buf[b] = ds
            nb = int(st.proc_size[b])
            if nb and np_:
                d_inter += ds / (np_ * nb)
        d_inter = d_inter / st.npairs
    d_access = 0
    if st.has_hw:
        for vi in st.helper_slots:
            v = int(vi)
            if v == u:
                continue
            s = int(st.sites[v])
            base = int(st.near2_d[s]) if int(st.near1_v[s]) == y else int(st.near1_d[s])
            new_d = base if base < int(st.dist[s, x]) else int(st.dist[s, x])
            d_access += int(st.hw[v]) * (new_d - int(st.near1_d[s]))
        if st.hw[u] > 0:
            base = int(st.near2_d[y])  # y is in the zone, so near1_v[y] == y
            new_d = base if base < int(st.dist[y, x]) else int(st.dist[y, x])
            d_access += int(st.hw[u]) * (new_d - int(st.near1_d[x]))
    return u, x, y, p, d_routing, d_inter, d_access


def _proposal_delta(st, row, alpha, beta, gamma, ds_buf):
    """Returns (delta, apply_fn) or None for an invalid proposal."""
    use_swap = len(st.swap_procs) > 0 and row[0] < 0.5
    if use_swap:
        u, v, d_routing, d_access = _eval_swap(st, row[1], row[2], row[3])
        delta = alpha * float(d_routing) + gamma * float(d_access)

        def apply():
            st.routing += d_routing
            st.access += d_access
            st.sites[u], st.sites[v] = st.sites[v], st.sites[u]
            st.occupied[st.sites[u]] = u + 1
            st.occupied[st.sites[v]] = v + 1

        return delta, apply
    out = _eval_move(st, row[1], row[2], ds_buf)
    if out is None:
        return None
    u, x, y, p, d_routing, d_inter, d_access = out

    delta = alpha * float(d_routing) - beta * d_inter + gamma * float(d_access)

    def apply():
        st.routing += d_routing
        st.access += d_access
        for b in range(st.m):
            if b != p:
                a, c = (p, b) if p < b else (b, p)
                st.cross[a, c] += ds_buf[b]
        st.occupied[x] = 0
        st.occupied[y] = u + 1
        st.sites[u] = y
        st._rebuild_nearest()

    return delta, apply


def _make_state(dist, adj_indptr, adj_indices, proc_start, sites0,
                gate_indptr, gate_slots, gate_wts, hw) -> _State:
    st = _State(dist, proc_start, sites0, gate_indptr, gate_slots, gate_wts, hw)
    st.adj_indptr = adj_indptr
    st.adj_indices = adj_indices
    return st


def probe(dist, adj_indptr, adj_indices, proc_start, sites0, gate_indptr,
          gate_slots, gate_wts, hw, alpha, beta, gamma, uniforms):
    """Score proposals from the initial state without accepting any."""
    st = _make_state(dist, adj_indptr, adj_indices, proc_start, sites0,
                     gate_indptr, gate_slots, gate_wts, hw)
    ds_buf = np.zeros(st.m, dtype=np.int64)
    deltas = np.full(len(uniforms), np.nan)
    for t in range(len(uniforms)):
        out = _proposal_delta(st, uniforms[t], alpha, beta, gamma, ds_buf)
        if out is not None:
            deltas[t] = out[0]
    return deltas


def run(dist, adj_indptr, adj_indices, proc_start, sites0, gate_indptr,
        gate_slots, gate_wts, hw, alpha, beta, gamma, t0, cooling,
        iterations, moves_per_iter, uniforms, logu):
    st = _make_state(dist, adj_indptr, adj_indices, proc_start, sites0,
                     gate_indptr, gate_slots, gate_wts, hw)
    ds_buf = np.zeros(st.m, dtype=np.int64)
    cur = st.cost(alpha, beta, gamma)
    best = cur
    best_sites = st.sites.copy()
    trace = np.empty(iterations + 1)
    trace[0] = cur
    temp = t0
    accepted = 0
    proposed = 0
    t = 0
    for it in range(iterations):
        for _ in range(moves_per_iter):
            row = uniforms[t]
            out = _proposal_delta(st, row, alpha, beta, gamma, ds_buf)
            if out is not None:
                delta, apply = out
                if delta <= 0.0 or temp * logu[t] < -delta:
                    apply()
                    cur = st.cost(alpha, beta, gamma)
                    accepted += 1
                    if cur < best:
                        best = cur
                        best_sites = st.sites.copy()
            proposed += 1
            t += 1
        trace[it + 1] = cur
        temp = temp * cooling
    return {
        "best_sites": best_sites,
        "best_cost": best,
        "final_sites": st.sites.copy(),
        "final_cost": cur,
        "trace": trace,
        "accepted": accepted,
        "proposed": proposed,
    }
