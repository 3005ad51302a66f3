"""Virtual-to-physical instruction scheduling with shared helper qubits.

Batch members take turns emitting instructions (round-robin, one per
process per cycle).  Data operands translate through the batch layout;
helper operands bind on demand to free vertices, nearest-first to the
data the instruction touches.  Releasing a helper emits a system-owned
RESET on the physical qubit before it returns to the free set, so no
state leaks between tenants.  verify_isolation replays a finished
stream and checks exactly that.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Mapping

from .placement.layout import Layout, PlacementError
from .process import Process, peak_helper_demand
from .topology import HardwareGraph

SYSTEM_OWNER = "SYSTEM"


class DeadlockError(RuntimeError):
    """Every unfinished member is stuck waiting for helper capacity."""

    def __init__(self, blocked: list[str]):
        super().__init__(f"helper deadlock; blocked processes: {', '.join(blocked)}")
        self.blocked = blocked


@dataclass(frozen=True)
class HardwareInstruction:
    seq: int
    owner: str  # process id, or SYSTEM for isolation resets
    opcode: str
    qubits: tuple[int, ...]
    param: float | None = None
    cbit: int | None = None  # owner-local classical index for MEASURE

    def to_text(self) -> str:
        op = self.opcode if self.param is None else f"{self.opcode}({self.param!r})"
        parts = [str(self.seq), self.owner, op, *map(str, self.qubits)]
        return " ".join(parts)

    def to_json(self) -> dict:
        d = {
            "seq": self.seq,
            "owner": self.owner,
            "opcode": self.opcode,
            "qubits": list(self.qubits),
        }
        if self.param is not None:
            d["param"] = self.param
        if self.cbit is not None:
            d["cbit"] = self.cbit
        return d

    @staticmethod
    def from_json(d: Mapping) -> "HardwareInstruction":
        return HardwareInstruction(
            seq=d["seq"],
            owner=d["owner"],
            opcode=d["opcode"],
            qubits=tuple(d["qubits"]),
            param=d.get("param"),
            cbit=d.get("cbit"),
        )


@dataclass(frozen=True)
class HelperEpisode:
    """One allocation span of a physical qubit by one process."""

    owner: str
    helper_index: int  # virtual helper id within the owner
    episode: int  # 0, 1, ... per (owner, helper_index)
    site: int  # physical qubit
    bind_seq: int  # seq of the first instruction that uses the binding
    release_seq: int | None  # seq of the closing system RESET

    def covers(self, seq: int) -> bool:
        if seq < self.bind_seq:
            return False
        return self.release_seq is None or seq <= self.release_seq

    def to_json(self) -> dict:
        return {
            "owner": self.owner,
            "helper_index": self.helper_index,
            "episode": self.episode,
            "site": self.site,
            "bind_seq": self.bind_seq,
            "release_seq": self.release_seq,
        }

    @staticmethod
    def from_json(d: Mapping) -> "HelperEpisode":
        return HelperEpisode(
            owner=d["owner"],
            helper_index=d["helper_index"],
            episode=d["episode"],
            site=d["site"],
            bind_seq=d["bind_seq"],
            release_seq=d["release_seq"],
        )


@dataclass
class ScheduledProgram:
    """A fully devirtualized batch: flat stream plus binding history."""

    instructions: list[HardwareInstruction]
    episodes: list[HelperEpisode]
    layout: Layout
    member_ids: tuple[str, ...]
    pools: dict[str, tuple[int, ...]] | None = None  # private zones, no-sharing mode

    @property
    def touched_sites(self) -> frozenset[int]:
        return frozenset(
            q
            for ins in self.instructions
            if ins.owner != SYSTEM_OWNER
            for q in ins.qubits
        )

    def to_text(self) -> str:
        return "\n".join(ins.to_text() for ins in self.instructions) + "\n"

    def to_json(self) -> dict:
        return {
            "schema": 1,
            "kind": "scheduled_program",
            "members": list(self.member_ids),
            "layout": self.layout.to_json(),
            "pools": (
                {pid: list(v) for pid, v in sorted(self.pools.items())}
                if self.pools is not None
                else None
            ),
            "instructions": [ins.to_json() for ins in self.instructions],
            "episodes": [e.to_json() for e in self.episodes],
        }

    @staticmethod
    def from_json(d: Mapping) -> "ScheduledProgram":
        pools = d.get("pools")
        return ScheduledProgram(
            instructions=[HardwareInstruction.from_json(x) for x in d["instructions"]],
            episodes=[HelperEpisode.from_json(x) for x in d["episodes"]],
            layout=Layout.from_json(d["layout"]),
            member_ids=tuple(d["members"]),
            pools=(
                {pid: tuple(v) for pid, v in pools.items()} if pools is not None else None
            ),
        )


def nearest_free_helper(
    free: set[int], anchor_sites, graph: HardwareGraph
) -> int:
    """Free vertex with the smallest total distance to the anchor sites.

    Ties break toward the lowest physical index; with no anchors the
    lowest free index wins outright.
    """
    if not free:
        raise ValueError("no free helper vertex")
    anchors = list(anchor_sites)
    if not anchors:
        return min(free)
    dist = graph.dist
    return min(free, key=lambda v: (sum(int(dist[v, a]) for a in anchors), v))


class _MemberState:
    def __init__(self, process: Process, sites: tuple[int, ...]):
        self.process = process
        self.sites = sites
        self.pc = 0
        self.bindings: dict[int, int] = {}  # helper index -> site
        self.episode_count: dict[int, int] = {}
        self.open_episodes: dict[int, int] = {}  # helper index -> episodes[] slot

    @property
    def done(self) -> bool:
        return self.pc >= len(self.process.instructions)


def schedule_instructions(
    processes,
    layout: Layout,
    graph: HardwareGraph,
    pools: Mapping[str, tuple[int, ...]] | None = None,
) -> ScheduledProgram:
    """Translate a batch to one hardware stream; raises DeadlockError if stuck.

    With pools=None all processes draw helpers from the shared free zone;
    otherwise each process is confined to its private pool.
    """
    processes = list(processes)
    zone = layout.helper_zone
    if pools is not None:
        flat: list[int] = [v for pool in pools.values() for v in pool]
        if len(flat) != len(set(flat)):
            raise PlacementError("private helper pools overlap")
        if not set(flat) <= zone:
            raise PlacementError("private helper pools must avoid data sites")
        free_by_pid = {p.id: set(pools[p.id]) for p in processes}
    else:
        shared = set(zone)
        free_by_pid = {p.id: shared for p in processes}  # one shared set

    members = [_MemberState(p, _member_sites(layout, p)) for p in processes]
    stream: list[HardwareInstruction] = []
    episodes: list[HelperEpisode] = []

    def emit(owner, opcode, qubits, param=None, cbit=None) -> int:
        seq = len(stream)
        stream.append(
            HardwareInstruction(seq, owner, opcode, tuple(qubits), param, cbit)
        )
        return seq

    while True:
        progressed = False
        blocked: list[str] = []
        for st in members:
            if st.done:
                continue
            if _step(st, graph, free_by_pid[st.process.id], emit, episodes):
                progressed = True
            else:
                blocked.append(st.process.id)
        if all(st.done for st in members):
            break
        if not progressed:
            raise DeadlockError(blocked)
    return ScheduledProgram(
        instructions=stream,
        episodes=episodes,
        layout=layout,
        member_ids=tuple(p.id for p in processes),
        pools={pid: tuple(sorted(v)) for pid, v in pools.items()} if pools else None,
    )


def _member_sites(layout: Layout, p: Process) -> tuple[int, ...]:
    sites = layout.assign.get(p.id)
    if sites is None or len(sites) != p.num_data:
        raise PlacementError(f"layout does not cover process {p.id}")
    return sites


def _step(st: _MemberState, graph, free: set[int], emit, episodes) -> bool:
    """Try to emit st's next instruction; False means blocked on helpers."""
    p = st.process
    ins = p.instructions[st.pc]
    if ins.opcode == "FREE_HELPER":
        h = ins.operands[0].index
        site = st.bindings.pop(h)
        seq = emit(SYSTEM_OWNER, "RESET", (site,))
        slot = st.open_episodes.pop(h)
        episodes[slot] = replace(episodes[slot], release_seq=seq)
        free.add(site)
        st.pc += 1
        return True
    unbound = []
    for o in ins.operands:
        if o.kind == "helper" and o.index not in st.bindings and o.index not in unbound:
            unbound.append(o.index)
    if len(unbound) > len(free):
        return False  # wait for capacity; all-or-nothing binding
    if unbound:
        anchor = [st.sites[o.index] for o in ins.operands if o.kind == "data"]
        if not anchor:
            anchor = list(st.sites)
        for h in unbound:
            site = nearest_free_helper(free, anchor, graph)
            free.discard(site)
            st.bindings[h] = site
    qubits = []
    cbit = None
    for o in ins.operands:
        if o.kind == "data":
            qubits.append(st.sites[o.index])
        elif o.kind == "helper":
            qubits.append(st.bindings[o.index])
        else:
            cbit = o.index
    seq_next = emit(p.id, ins.opcode, qubits, ins.param, cbit)
    for h in unbound:
        n = st.episode_count.get(h, 0)
        st.episode_count[h] = n + 1
        st.open_episodes[h] = len(episodes)
        episodes.append(
            HelperEpisode(
                owner=p.id,
                helper_index=h,
                episode=n,
                site=st.bindings[h],
                bind_seq=seq_next,
                release_seq=None,
            )
        )
    st.pc += 1
    return True


def schedule_with_recovery(
    processes,
    layout: Layout,
    graph: HardwareGraph,
    pools: Mapping[str, tuple[int, ...]] | None = None,
) -> tuple[ScheduledProgram | None, list[str]]:
    """Schedule, evicting members until the batch fits; returns (program, evicted).

    Callers pass members in priority order; on a runtime deadlock the
    lowest-priority (last) member leaves first.  A member whose peak
    helper demand can never fit is evicted directly.  Returns (None,
    evicted) when nothing survives.
    """
    procs = list(processes)
    lay = layout
    pool_map = dict(pools) if pools is not None else None
    evicted: list[str] = []

    def drop(pid: str):
        nonlocal lay, pool_map
        evicted.append(pid)
        procs[:] = [p for p in procs if p.id != pid]
        lay = lay.without(pid)
        if pool_map is not None:
            pool_map.pop(pid, None)

    while procs:
        over = None
        for p in procs:
            cap = len(pool_map[p.id]) if pool_map is not None else len(lay.helper_zone)
            if peak_helper_demand(p) > cap:
                over = p.id
                break
        if over is not None:
            drop(over)
            continue
        try:
            return schedule_instructions(procs, lay, graph, pool_map), evicted
        except DeadlockError:
            drop(procs[-1].id)
    return None, evicted


@dataclass(frozen=True)
class IsolationReport:
    ok: bool
    failures: tuple[str, ...]
    episodes_checked: int
    resets_seen: int


def verify_isolation(sp: ScheduledProgram) -> IsolationReport:
    """Audit a stream: tenants touch only their own sites, and every
    helper hand-off is fenced by exactly one system reset.

    Sequence numbers only need to be strictly increasing, so a stream
    with instructions removed is still audited on its merits.
    """
    failures: list[str] = []
    layout = sp.layout
    data_owner: dict[int, str] = {}
    for pid, sites in layout.assign.items():
        for s in sites:
            data_owner[s] = pid

    last = -1
    resets = 0
    for ins in sp.instructions:
        if ins.seq <= last:
            failures.append(f"seq {ins.seq}: out of order")
        last = ins.seq
        if ins.owner == SYSTEM_OWNER:
            if ins.opcode != "RESET" or len(ins.qubits) != 1:
                failures.append(f"seq {ins.seq}: malformed system instruction")
            resets += 1

    # episode sanity: sits in free space (own pool if pooled), never on data
    by_site: dict[int, list[HelperEpisode]] = {}
    for e in sp.episodes:
        by_site.setdefault(e.site, []).append(e)
        if e.site in data_owner:
            failures.append(
                f"episode {e.owner}/s{e.helper_index}#{e.episode}: "
                f"bound to {data_owner[e.site]}'s data site {e.site}"
            )
        if sp.pools is not None and e.site not in sp.pools.get(e.owner, ()):
            failures.append(
                f"episode {e.owner}/s{e.helper_index}#{e.episode}: "
                f"site {e.site} outside the owner's private pool"
            )
        if e.release_seq is not None and e.release_seq <= e.bind_seq:
            failures.append(
                f"episode {e.owner}/s{e.helper_index}#{e.episode}: "
                f"released at {e.release_seq} before first use {e.bind_seq}"
            )

    # ownership: every tenant instruction touches own data or own live episode
    for ins in sp.instructions:
        if ins.owner == SYSTEM_OWNER:
            continue
        for q in ins.qubits:
            if data_owner.get(q) == ins.owner:
                continue
            covered = any(
                e.site == q and e.owner == ins.owner and e.covers(ins.seq)
                for e in by_site.get(q, ())
            )
            if not covered:
                failures.append(
                    f"seq {ins.seq}: {ins.owner} touches qubit {q} "
                    f"without owning it at that time"
                )

    # reset fencing: per site, one reset strictly between consecutive binds,
    # one after the final bind, none anywhere else
    reset_seqs: dict[int, list[int]] = {}
    for ins in sp.instructions:
        if ins.owner == SYSTEM_OWNER and ins.opcode == "RESET":
            for q in ins.qubits:
                reset_seqs.setdefault(q, []).append(ins.seq)
    for site, eps in by_site.items():
        eps = sorted(eps, key=lambda e: e.bind_seq)
        seqs = reset_seqs.get(site, [])
        for e1, e2 in zip(eps, eps[1:]):
            n = sum(1 for s in seqs if e1.bind_seq < s < e2.bind_seq)
            if n != 1:
                failures.append(
                    f"site {site}: {n} resets between hand-off from "
                    f"{e1.owner} to {e2.owner} (need exactly 1)"
                )
        tail = sum(1 for s in seqs if s > eps[-1].bind_seq)
        if tail != 1:
            failures.append(
                f"site {site}: {tail} resets after the final episode (need exactly 1)"
            )
        head = sum(1 for s in seqs if s < eps[0].bind_seq)
        if head != 0:
            failures.append(f"site {site}: unexpected reset before first episode")
    for site, seqs in reset_seqs.items():
        if site not in by_site:
            failures.append(f"site {site}: reset without any helper episode")

    return IsolationReport(
        ok=not failures,
        failures=tuple(failures),
        episodes_checked=len(sp.episodes),
        resets_seen=resets,
    )
