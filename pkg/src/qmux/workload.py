"""Synthetic tenant workloads: circuit families and Poisson arrivals.

Four generator families cover the interesting helper-usage shapes:

* ``random``   -- unstructured gates over data and helper qubits
* ``mcx``      -- multi-controlled X via a helper chain (helper heavy)
* ``stabilizer`` -- repeated parity-check rounds, helpers re-used every
  round (allocate, fan-in, measure, free)
* ``arithmetic`` -- compute/uncompute blocks with one fresh helper per
  layer

All randomness flows through one numpy Generator per call, so a given
(seed, params) pair always yields byte-identical programs.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Mapping

import numpy as np

from .process import (
    Process,
    VirtualInstruction,
    classical_bit,
    data_q,
    helper_q,
    parse_process,
    serialize_process,
)

FAMILIES = ("random", "mcx", "stabilizer", "arithmetic")

_QUARTER_TURN = math.pi / 4


class WorkloadError(ValueError):
    """Bad generator parameters or a malformed workload directory."""


def _ins(opcode, *operands, param=None):
    return VirtualInstruction(opcode, tuple(operands), param)


def _toffoli(a, b, t) -> list[VirtualInstruction]:
    """Doubly-controlled X over basis gates (T/T-dagger ladder)."""
    tdg = -_QUARTER_TURN
    return [
        _ins("H", t),
        _ins("CX", b, t),
        _ins("RZ", t, param=tdg),
        _ins("CX", a, t),
        _ins("T", t),
        _ins("CX", b, t),
        _ins("RZ", t, param=tdg),
        _ins("CX", a, t),
        _ins("T", b),
        _ins("T", t),
        _ins("H", t),
        _ins("CX", a, b),
        _ins("T", a),
        _ins("RZ", b, param=tdg),
        _ins("CX", a, b),
    ]


def _measure_all(n: int) -> list[VirtualInstruction]:
    return [_ins("MEASURE", data_q(i), classical_bit(i)) for i in range(n)]


def _mcx_body(controls: int) -> tuple[list[VirtualInstruction], int, int]:
    n = controls
    if n < 2:
        raise WorkloadError("mcx needs at least 2 controls")
    body = list(_toffoli(data_q(0), data_q(1), helper_q(0)))
    for k in range(1, n - 1):
        body += _toffoli(data_q(k + 1), helper_q(k - 1), helper_q(k))
    body.append(_ins("CX", helper_q(n - 2), data_q(n)))
    for k in range(n - 2, 0, -1):
        body += _toffoli(data_q(k + 1), helper_q(k - 1), helper_q(k))
        body.append(_ins("FREE_HELPER", helper_q(k)))
    body += _toffoli(data_q(0), data_q(1), helper_q(0))
    body.append(_ins("FREE_HELPER", helper_q(0)))
    body += _measure_all(n + 1)
    return body, n + 1, n - 1


def _stabilizer_body(data: int, rounds: int) -> tuple[list[VirtualInstruction], int, int]:
    if data < 2 or rounds < 1:
        raise WorkloadError("stabilizer needs data >= 2 and rounds >= 1")
    checks = data - 1
    body: list[VirtualInstruction] = []
    for r in range(rounds):
        for j in range(checks):
            s = helper_q(j)
            body.append(_ins("CX", data_q(j), s))
            body.append(_ins("CX", data_q(j + 1), s))
            body.append(_ins("MEASURE", s, classical_bit(r * checks + j)))
        body.extend(_ins("FREE_HELPER", helper_q(j)) for j in range(checks))
    body += [
        _ins("MEASURE", data_q(i), classical_bit(rounds * checks + i))
        for i in range(data)
    ]
    return body, data, checks


def _arithmetic_body(
    nvars: int, layers: int, rng: np.random.Generator
) -> tuple[list[VirtualInstruction], int, int]:
    if nvars < 2 or layers < 1:
        raise WorkloadError("arithmetic needs vars >= 2 and layers >= 1")
    body: list[VirtualInstruction] = []
    for k in range(layers):
        a, b = rng.choice(nvars, size=2, replace=False)
        t = int(rng.integers(nvars))
        s = helper_q(k)
        body += _toffoli(data_q(int(a)), data_q(int(b)), s)
        body.append(_ins("CX", s, data_q(t)))
        body += _toffoli(data_q(int(a)), data_q(int(b)), s)
        body.append(_ins("FREE_HELPER", s))
    body += _measure_all(nvars)
    return body, nvars, layers


def _random_body(
    data: int, helpers: int, gates: int, rng: np.random.Generator
) -> tuple[list[VirtualInstruction], int, int]:
    if data < 1 or helpers < 0:
        raise WorkloadError("random needs data >= 1 and helper >= 0")
    if gates < max(1, helpers):
        raise WorkloadError("random needs gates >= max(1, helper) to touch every qubit")
    pool = [data_q(i) for i in range(data)] + [helper_q(i) for i in range(helpers)]
    body: list[VirtualInstruction] = []
    for i in range(helpers):  # guarantee every declared helper is exercised
        body.append(_ins("CX", pool[int(rng.integers(data))], helper_q(i)))
    one_q = ("H", "X", "Y", "Z", "S", "T")
    for _ in range(gates - helpers):
        r = rng.random()
        if len(pool) < 2 or r < 0.25:
            tgt = pool[int(rng.integers(len(pool)))]
            body.append(_ins(one_q[int(rng.integers(len(one_q)))], tgt))
        elif r < 0.35:
            tgt = pool[int(rng.integers(len(pool)))]
            body.append(_ins("RZ", tgt, param=float(rng.uniform(0, 2 * math.pi))))
        else:
            i, j = rng.choice(len(pool), size=2, replace=False)
            op = "CX" if r < 0.8 else ("CZ" if r < 0.92 else "SWAP")
            body.append(_ins(op, pool[int(i)], pool[int(j)]))
    # release each helper right after its final use
    last: dict[int, int] = {}
    for idx, ins in enumerate(body):
        for o in ins.operands:
            if o.kind == "helper":
                last[o.index] = idx
    for h, idx in sorted(last.items(), key=lambda kv: -kv[1]):
        body.insert(idx + 1, _ins("FREE_HELPER", helper_q(h)))
    body += _measure_all(data)
    return body, data, helpers


def generate_family(
    family: str,
    params: Mapping[str, int],
    seed: int = 0,
    shots: int = 1000,
) -> Process:
    """Build one process of the named family; fully seed-deterministic."""
    rng = np.random.default_rng(seed)
    p = dict(params)
    try:
        if family == "mcx":
            controls = p.pop("controls")
            body, nd, nh = _mcx_body(controls)
            pid = f"mcx{controls}"
        elif family == "stabilizer":
            data, rounds = p.pop("data"), p.pop("rounds")
            body, nd, nh = _stabilizer_body(data, rounds)
            pid = f"stab{data}x{rounds}"
        elif family == "arithmetic":
            nvars, layers = p.pop("vars"), p.pop("layers")
            body, nd, nh = _arithmetic_body(nvars, layers, rng)
            pid = f"arith{nvars}x{layers}"
        elif family == "random":
            data, helpers, gates = p.pop("data"), p.pop("helper"), p.pop("gates")
            body, nd, nh = _random_body(data, helpers, gates, rng)
            pid = f"rand{data}_{helpers}_{gates}"
        else:
            raise WorkloadError(f"unknown family {family!r} (choose from {FAMILIES})")
    except KeyError as exc:
        raise WorkloadError(f"{family} is missing parameter {exc}")
    if p:
        raise WorkloadError(f"{family} got unexpected parameters {sorted(p)}")
    return Process(
        id=pid, num_data=nd, num_helper=nh, shots=shots, instructions=tuple(body)
    )


@dataclass(frozen=True)
class WorkloadSpec:
    """Open-system arrival model: Poisson arrivals over a fixed window."""

    arrival_rate: float  # expected jobs per second
    duration: float  # seconds during which jobs may arrive
    seed: int = 0
    shot_range: tuple[int, int] = (500, 8000)  # inclusive bounds
    size_range: tuple[int, int] = (3, 8)  # data-qubit scale per job
    family_mix: Mapping[str, float] = field(
        default_factory=lambda: {
            "random": 0.4,
            "mcx": 0.2,
            "stabilizer": 0.2,
            "arithmetic": 0.2,
        }
    )

    def __post_init__(self):
        if self.arrival_rate <= 0 or self.duration <= 0:
            raise WorkloadError("arrival_rate and duration must be positive")
        lo, hi = self.shot_range
        if not (1 <= lo <= hi):
            raise WorkloadError(f"bad shot_range {self.shot_range}")
        lo, hi = self.size_range
        if not (2 <= lo <= hi):
            raise WorkloadError(f"bad size_range {self.size_range}")
        if not self.family_mix:
            raise WorkloadError("family_mix must not be empty")
        for name, w in self.family_mix.items():
            if name not in FAMILIES:
                raise WorkloadError(f"unknown family {name!r} in mix")
            if w < 0:
                raise WorkloadError(f"negative weight for {name!r}")
        if sum(self.family_mix.values()) <= 0:
            raise WorkloadError("family_mix weights sum to zero")

    def to_json(self) -> dict:
        return {
            "arrival_rate": self.arrival_rate,
            "duration": self.duration,
            "seed": self.seed,
            "shot_range": list(self.shot_range),
            "size_range": list(self.size_range),
            "family_mix": dict(sorted(self.family_mix.items())),
        }

    @staticmethod
    def from_json(d: Mapping) -> "WorkloadSpec":
        return WorkloadSpec(
            arrival_rate=d["arrival_rate"],
            duration=d["duration"],
            seed=d.get("seed", 0),
            shot_range=tuple(d.get("shot_range", (500, 8000))),
            size_range=tuple(d.get("size_range", (3, 8))),
            family_mix=dict(d.get("family_mix", {"random": 1.0})),
        )


def _draw_params(family: str, spec: WorkloadSpec, rng: np.random.Generator) -> dict:
    lo, hi = spec.size_range
    if family == "mcx":
        return {"controls": int(rng.integers(max(2, lo - 1), max(2, hi - 1) + 1))}
    if family == "stabilizer":
        return {
            "data": int(rng.integers(lo, hi + 1)),
            "rounds": int(rng.integers(1, 4)),
        }
    if family == "arithmetic":
        return {
            "vars": int(rng.integers(lo, hi + 1)),
            "layers": int(rng.integers(1, 4)),
        }
    data = int(rng.integers(lo, hi + 1))
    helpers = int(rng.integers(1, max(2, data // 2) + 1))
    gates = int(rng.integers(2 * (data + helpers), 4 * (data + helpers) + 1))
    return {"data": data, "helper": helpers, "gates": gates}


def generate_workload(spec: WorkloadSpec) -> list[Process]:
    """Draw Poisson arrivals and one process per arrival.

    Processes come back sorted by arrival time with ids P000, P001, ...;
    per-job family, size, shots, and body are all derived from spec.seed.
    """
    rng = np.random.default_rng(spec.seed)
    names = sorted(spec.family_mix)
    weights = np.array([spec.family_mix[n] for n in names], dtype=float)
    weights = weights / weights.sum()
    out: list[Process] = []
    t = 0.0
    while True:
        t += float(rng.exponential(1.0 / spec.arrival_rate))
        if t >= spec.duration:
            break
        family = names[int(rng.choice(len(names), p=weights))]
        params = _draw_params(family, spec, rng)
        body_seed = int(rng.integers(2**31))
        shots = int(rng.integers(spec.shot_range[0], spec.shot_range[1] + 1))
        p = generate_family(family, params, seed=body_seed, shots=shots)
        out.append(replace(p, id=f"P{len(out):03d}", arrival_time=t))
    return out


def write_workload(processes: list[Process], out_dir: str | Path) -> Path:
    """Store programs plus a manifest; files are byte-stable per input."""
    out = Path(out_dir)
    (out / "procs").mkdir(parents=True, exist_ok=True)
    jobs = []
    for p in processes:
        fname = f"{p.id}.qp"
        (out / "procs" / fname).write_text(serialize_process(p))
        jobs.append(
            {"id": p.id, "file": f"procs/{fname}", "arrival_time": p.arrival_time}
        )
    manifest = {"schema": 1, "kind": "workload", "jobs": jobs}
    (out / "manifest.json").write_text(
        json.dumps(manifest, indent=2, sort_keys=True) + "\n"
    )
    return out


def load_workload(in_dir: str | Path) -> list[Process]:
    path = Path(in_dir)
    try:
        manifest = json.loads((path / "manifest.json").read_text())
    except FileNotFoundError:
        raise WorkloadError(f"{path} has no manifest.json")
    except json.JSONDecodeError as exc:
        raise WorkloadError(f"{path}/manifest.json is not valid JSON: {exc}")
    if manifest.get("kind") != "workload":
        raise WorkloadError(f"{path} is not a workload directory")
    out = []
    for job in manifest["jobs"]:
        text = (path / job["file"]).read_text()
        p = parse_process(text, default_id=job["id"])
        out.append(replace(p, arrival_time=float(job["arrival_time"])))
    return out
