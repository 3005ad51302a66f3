# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled annealing kernel.

Ports _sa_py move for move: same integer cost state, same float
expression order, same stream indexing.  Given identical inputs the two
backends must produce bit-identical trajectories; the test suite holds
them to that.
"""

import numpy as np

cimport cython
cimport numpy as cnp

cnp.import_array()

BACKEND_NAME = "compiled"

ctypedef cnp.int32_t i32
ctypedef cnp.int64_t i64
ctypedef cnp.float64_t f64

cdef enum:
    BIG = 1 << 30


cdef inline int _pick(double r, int n) nogil:
    cdef int i = <int>(r * n)
    return i if i < n else n - 1


@cython.final
cdef class _State:
    cdef const i32[:, ::1] dist
    cdef const i32[::1] adj_indptr
    cdef const i32[::1] adj_indices
    cdef const i32[::1] proc_start
    cdef const i32[::1] gate_indptr
    cdef const i32[::1] gate_slots
    cdef const i64[::1] gate_wts
    cdef const i64[::1] hw
    cdef i32[::1] sites
    cdef i32[::1] slot_proc
    cdef i32[::1] swap_procs
    cdef i32[::1] helper_slots
    cdef i32[::1] occupied
    cdef i32[::1] near1_d
    cdef i32[::1] near1_v
    cdef i32[::1] near2_d
    cdef i64[::1] proc_size
    cdef i64[::1] ds_buf
    cdef i64[:, ::1] cross
    cdef int n, m, S, npairs, n_swap, n_helpers
    cdef bint has_hw
    cdef i64 routing, access
    # staged proposal
    cdef int prop_kind  # 0 swap, 1 move
    cdef int prop_u, prop_v, prop_x, prop_y, prop_p
    cdef i64 d_routing, d_access
    cdef double d_inter

    def __init__(self, dist, adj_indptr, adj_indices, proc_start, sites0,
                 gate_indptr, gate_slots, gate_wts, hw):
        cdef int p, u, v, k
        self.dist = dist
        self.adj_indptr = adj_indptr
        self.adj_indices = adj_indices
        self.proc_start = proc_start
        self.gate_indptr = gate_indptr
        self.gate_slots = gate_slots
        self.gate_wts = gate_wts
        self.hw = hw
        self.sites = sites0.copy()
        self.n = dist.shape[0]
        self.m = len(proc_start) - 1
        self.S = len(sites0)
        self.npairs = self.m * (self.m - 1) // 2
        self.slot_proc = np.empty(self.S, dtype=np.int32)
        for p in range(self.m):
            for u in range(self.proc_start[p], self.proc_start[p + 1]):
                self.slot_proc[u] = p
        self.proc_size = np.empty(self.m, dtype=np.int64)
        swaps = []
        for p in range(self.m):
            self.proc_size[p] = self.proc_start[p + 1] - self.proc_start[p]
            if self.proc_size[p] >= 2:
                swaps.append(p)
        self.swap_procs = np.asarray(swaps, dtype=np.int32)
        self.n_swap = len(swaps)
        helpers = []
        for u in range(self.S):
            if self.hw[u] > 0:
                helpers.append(u)
        self.helper_slots = np.asarray(helpers, dtype=np.int32)
        self.n_helpers = len(helpers)
        self.has_hw = self.n_helpers > 0
        self.occupied = np.zeros(self.n, dtype=np.int32)
        for u in range(self.S):
            self.occupied[self.sites[u]] = u + 1
        self.ds_buf = np.zeros(self.m, dtype=np.int64)
        self.near1_d = np.empty(self.n, dtype=np.int32)
        self.near1_v = np.empty(self.n, dtype=np.int32)
        self.near2_d = np.empty(self.n, dtype=np.int32)
        self._init_routing()
        self._init_cross()
        self._rebuild_nearest()
        self._init_access()

    cdef void _init_routing(self):
        cdef int u, k
        cdef i32 su, sv
        cdef i64 total = 0
        for u in range(self.S):
            su = self.sites[u]
            for k in range(self.gate_indptr[u], self.gate_indptr[u + 1]):
                sv = self.sites[self.gate_slots[k]]
                total += self.gate_wts[k] * (<i64>self.dist[su, sv] - 1)
        self.routing = total // 2  # each gate sits on both endpoint rows

    cdef void _init_cross(self):
        cdef int a, b, i, j
        cdef i64 s
        self.cross = np.zeros((self.m, self.m), dtype=np.int64)
        for a in range(self.m):
            for b in range(a + 1, self.m):
                s = 0
                for i in range(self.proc_start[a], self.proc_start[a + 1]):
                    for j in range(self.proc_start[b], self.proc_start[b + 1]):
                        s += self.dist[self.sites[i], self.sites[j]]
                self.cross[a, b] = s

    cdef void _rebuild_nearest(self):
        cdef int v, w
        cdef i32 best, second, bestv, d
        cdef bint any_zone = False
        for w in range(self.n):
            if self.occupied[w] == 0:
                any_zone = True
                break
        for v in range(self.n):
            best = BIG
            second = BIG
            bestv = -1
            if any_zone:
                for w in range(self.n):
                    if self.occupied[w] != 0:
                        continue
                    d = self.dist[v, w]
                    if d < best:
                        second = best
                        best = d
                        bestv = w
                    elif d < second:
                        second = d
            self.near1_d[v] = best
            self.near1_v[v] = bestv
            self.near2_d[v] = second

    cdef void _init_access(self):
        cdef int k, v
        cdef i64 total = 0
        for k in range(self.n_helpers):
            v = self.helper_slots[k]
            total += self.hw[v] * (<i64>self.near1_d[self.sites[v]] - 1)
        self.access = total

    cdef double cost(self, double alpha, double beta, double gamma):
        cdef int a, b
        cdef i64 na, nb
        cdef double acc = 0.0
        cdef double inter
        for a in range(self.m):
            na = self.proc_size[a]
            for b in range(a + 1, self.m):
                nb = self.proc_size[b]
                if na != 0 and nb != 0:
                    acc += (<double>self.cross[a, b]) / (<double>(na * nb))
        inter = acc / self.npairs if self.npairs else 0.0
        return alpha * (<double>self.routing) - beta * inter + gamma * (<double>self.access)

    cdef bint _eval_swap(self, double r1, double r2, double r3):
        cdef int p, base, sz, i, j, u, v, k, w
        cdef i32 x, y, sw
        cdef i64 d_routing = 0, d_access = 0
        cdef i64 nx, ny
        p = self.swap_procs[_pick(r1, self.n_swap)]
        base = self.proc_start[p]
        sz = self.proc_start[p + 1] - base
        i = _pick(r2, sz)
        j = _pick(r3, sz - 1)
        if j >= i:
            j += 1
        u = base + i
        v = base + j
        x = self.sites[u]
        y = self.sites[v]
        for k in range(self.gate_indptr[u], self.gate_indptr[u + 1]):
            w = self.gate_slots[k]
            if w == v:
                continue  # the mutual gate's length is unchanged by a swap
            sw = self.sites[w]
            d_routing += self.gate_wts[k] * (<i64>self.dist[y, sw] - <i64>self.dist[x, sw])
        for k in range(self.gate_indptr[v], self.gate_indptr[v + 1]):
            w = self.gate_slots[k]
            if w == u:
                continue
            sw = self.sites[w]
            d_routing += self.gate_wts[k] * (<i64>self.dist[x, sw] - <i64>self.dist[y, sw])
        if self.has_hw:
            nx = self.near1_d[x]
            ny = self.near1_d[y]
            d_access += self.hw[u] * (ny - nx)
            d_access += self.hw[v] * (nx - ny)
        self.prop_kind = 0
        self.prop_u = u
        self.prop_v = v
        self.d_routing = d_routing
        self.d_access = d_access
        self.d_inter = 0.0
        return True

    cdef bint _eval_move(self, double r1, double r2):
        cdef int u, p, b, k, v, lo, hi, start, deg
        cdef i32 x, y, s, sw
        cdef i64 d_routing = 0, d_access = 0, ds, np_, nb, base_d, new_d
        cdef double d_inter = 0.0
        u = _pick(r1, self.S)
        x = self.sites[u]
        start = self.adj_indptr[x]
        deg = self.adj_indptr[x + 1] - start
        y = self.adj_indices[start + _pick(r2, deg)]
        if self.occupied[y] != 0:
            return False
        p = self.slot_proc[u]
        for k in range(self.gate_indptr[u], self.gate_indptr[u + 1]):
            sw = self.sites[self.gate_slots[k]]
            d_routing += self.gate_wts[k] * (<i64>self.dist[y, sw] - <i64>self.dist[x, sw])
        if self.m > 1:
            np_ = self.proc_size[p]
            for b in range(self.m):
                if b == p:
                    self.ds_buf[b] = 0
                    continue
                ds = 0
                lo = self.proc_start[b]
                hi = self.proc_start[b + 1]
                for k in range(lo, hi):
                    sw = self.sites[k]
                    ds += <i64>self.dist[y, sw] - <i64>self.dist[x, sw]
                self.ds_buf[b] = ds
                nb = self.proc_size[b]
                if nb != 0 and np_ != 0:
                    d_inter += (<double>ds) / (<double>(np_ * nb))
            d_inter = d_inter / self.npairs
        if self.has_hw:
            for k in range(self.n_helpers):
                v = self.helper_slots[k]
                if v == u:
                    continue
                s = self.sites[v]
                base_d = self.near2_d[s] if self.near1_v[s] == y else self.near1_d[s]
                new_d = base_d if base_d < <i64>self.dist[s, x] else <i64>self.dist[s, x]
                d_access += self.hw[v] * (new_d - <i64>self.near1_d[s])
            if self.hw[u] > 0:
                base_d = self.near2_d[y]  # y is in the zone, so near1_v[y] == y
                new_d = base_d if base_d < <i64>self.dist[y, x] else <i64>self.dist[y, x]
                d_access += self.hw[u] * (new_d - <i64>self.near1_d[x])
        self.prop_kind = 1
        self.prop_u = u
        self.prop_x = x
        self.prop_y = y
        self.prop_p = p
        self.d_routing = d_routing
        self.d_access = d_access
        self.d_inter = d_inter
        return True

    cdef bint eval_proposal(self, double r0, double r1, double r2, double r3,
                            double alpha, double beta, double gamma,
                            double* delta):
        cdef bint use_swap = self.n_swap > 0 and r0 < 0.5
        if use_swap:
            self._eval_swap(r1, r2, r3)
            delta[0] = alpha * (<double>self.d_routing) + gamma * (<double>self.d_access)
            return True
        if not self._eval_move(r1, r2):
            return False
        delta[0] = (
            alpha * (<double>self.d_routing)
            - beta * self.d_inter
            + gamma * (<double>self.d_access)
        )
        return True

    cdef void apply_staged(self):
        cdef int u, v, b, a, c
        cdef i32 tmp
        if self.prop_kind == 0:
            u = self.prop_u
            v = self.prop_v
            self.routing += self.d_routing
            self.access += self.d_access
            tmp = self.sites[u]
            self.sites[u] = self.sites[v]
            self.sites[v] = tmp
            self.occupied[self.sites[u]] = u + 1
            self.occupied[self.sites[v]] = v + 1
            return
        u = self.prop_u
        self.routing += self.d_routing
        self.access += self.d_access
        for b in range(self.m):
            if b != self.prop_p:
                if self.prop_p < b:
                    a = self.prop_p
                    c = b
                else:
                    a = b
                    c = self.prop_p
                self.cross[a, c] += self.ds_buf[b]
        self.occupied[self.prop_x] = 0
        self.occupied[self.prop_y] = u + 1
        self.sites[u] = self.prop_y
        self._rebuild_nearest()


def probe(dist, adj_indptr, adj_indices, proc_start, sites0, gate_indptr,
          gate_slots, gate_wts, hw, alpha, beta, gamma, uniforms):
    """Score proposals from the initial state without accepting any."""
    cdef _State st = _State(dist, adj_indptr, adj_indices, proc_start, sites0,
                            gate_indptr, gate_slots, gate_wts, hw)
    cdef const f64[:, ::1] u = uniforms
    cdef int t, rows = uniforms.shape[0]
    cdef double delta
    cdef double a = alpha, b = beta, g = gamma
    out = np.full(rows, np.nan)
    cdef f64[::1] deltas = out
    for t in range(rows):
        if st.eval_proposal(u[t, 0], u[t, 1], u[t, 2], u[t, 3], a, b, g, &delta):
            deltas[t] = delta
    return out


def run(dist, adj_indptr, adj_indices, proc_start, sites0, gate_indptr,
        gate_slots, gate_wts, hw, alpha, beta, gamma, t0, cooling,
        iterations, moves_per_iter, uniforms, logu):
    cdef _State st = _State(dist, adj_indptr, adj_indices, proc_start, sites0,
                            gate_indptr, gate_slots, gate_wts, hw)
    cdef const f64[:, ::1] u = uniforms
    cdef const f64[::1] lu = logu
    cdef double a = alpha, b = beta, g = gamma
    cdef double temp = t0, cool = cooling
    cdef int iters = iterations, moves = moves_per_iter
    cdef double cur = st.cost(a, b, g)
    cdef double best = cur
    best_sites_arr = np.asarray(st.sites).copy()
    cdef i32[::1] best_sites = best_sites_arr
    trace_arr = np.empty(iters + 1)
    cdef f64[::1] trace = trace_arr
    trace[0] = cur
    cdef long accepted = 0, proposed = 0
    cdef int it, j, k, t = 0
    cdef double delta
    for it in range(iters):
        for j in range(moves):
            if st.eval_proposal(u[t, 0], u[t, 1], u[t, 2], u[t, 3], a, b, g, &delta):
                if delta <= 0.0 or temp * lu[t] < -delta:
                    st.apply_staged()
                    cur = st.cost(a, b, g)
                    accepted += 1
                    if cur < best:
                        best = cur
                        for k in range(st.S):
                            best_sites[k] = st.sites[k]
            proposed += 1
            t += 1
        trace[it + 1] = cur
        temp = temp * cool
    return {
        "best_sites": best_sites_arr,
        "best_cost": best,
        "final_sites": np.asarray(st.sites).copy(),
        "final_cost": cur,
        "trace": trace_arr,
        "accepted": accepted,
        "proposed": proposed,
    }
