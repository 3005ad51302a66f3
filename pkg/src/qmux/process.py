"""Virtual process model: programs submitted by tenants.

A process declares how many data qubits, helper qubits, and shots it
wants, then lists instructions over virtual operands.  Data qubits
(``q0..``) live for the whole program; helper qubits (``s0..``) are
scratch that must be explicitly released with FREE_HELPER, and may be
re-used afterwards (each use span is a separate allocation episode).
Classical bits (``c0..``) receive MEASURE results.

The text format is line oriented::

    proc adder          # optional label
    shots 1000
    data 3
    helper 1
    H q0
    CX q0 s0
    RZ(0.25) q1
    MEASURE q0 c0
    FREE_HELPER s0
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field, replace
from functools import cached_property

ONE_QUBIT_GATES = frozenset({"H", "X", "Y", "Z", "S", "T", "RZ"})
TWO_QUBIT_GATES = frozenset({"CX", "CZ", "SWAP"})
OPCODES = ONE_QUBIT_GATES | TWO_QUBIT_GATES | {"MEASURE", "FREE_HELPER"}

DATA = "data"
HELPER = "helper"
CLASSICAL = "classical"

_KIND_PREFIX = {DATA: "q", HELPER: "s", CLASSICAL: "c"}
_PREFIX_KIND = {v: k for k, v in _KIND_PREFIX.items()}


class ProcessError(ValueError):
    """Malformed process text or inconsistent resource declarations."""


@dataclass(frozen=True)
class VirtualOperand:
    kind: str  # DATA, HELPER, or CLASSICAL
    index: int

    def __post_init__(self):
        if self.kind not in _KIND_PREFIX:
            raise ProcessError(f"unknown operand kind {self.kind!r}")
        if self.index < 0:
            raise ProcessError(f"negative operand index {self.index}")

    def __str__(self):
        return f"{_KIND_PREFIX[self.kind]}{self.index}"


def data_q(index: int) -> VirtualOperand:
    return VirtualOperand(DATA, index)


def helper_q(index: int) -> VirtualOperand:
    return VirtualOperand(HELPER, index)


def classical_bit(index: int) -> VirtualOperand:
    return VirtualOperand(CLASSICAL, index)


@dataclass(frozen=True)
class VirtualInstruction:
    opcode: str
    operands: tuple[VirtualOperand, ...]
    param: float | None = None  # RZ rotation angle

    def __post_init__(self):
        _check_instruction(self)

    @property
    def quantum_operands(self) -> tuple[VirtualOperand, ...]:
        return tuple(o for o in self.operands if o.kind != CLASSICAL)

    def __str__(self):
        op = self.opcode if self.param is None else f"{self.opcode}({self.param!r})"
        return " ".join([op, *(str(o) for o in self.operands)])


def _check_instruction(ins: VirtualInstruction) -> None:
    op, n = ins.opcode, len(ins.operands)
    if op not in OPCODES:
        raise ProcessError(f"unknown opcode {op!r}")
    if op == "RZ":
        if ins.param is None or not math.isfinite(ins.param):
            raise ProcessError("RZ needs a finite angle parameter")
    elif ins.param is not None:
        raise ProcessError(f"{op} takes no parameter")
    if op in ONE_QUBIT_GATES:
        if n != 1 or ins.operands[0].kind == CLASSICAL:
            raise ProcessError(f"{op} takes one qubit operand")
    elif op in TWO_QUBIT_GATES:
        if n != 2 or any(o.kind == CLASSICAL for o in ins.operands):
            raise ProcessError(f"{op} takes two qubit operands")
        if ins.operands[0] == ins.operands[1]:
            raise ProcessError(f"{op} operands must be distinct")
    elif op == "MEASURE":
        if (
            n != 2
            or ins.operands[0].kind == CLASSICAL
            or ins.operands[1].kind != CLASSICAL
        ):
            raise ProcessError("MEASURE takes a qubit and a classical bit")
    elif op == "FREE_HELPER":
        if n != 1 or ins.operands[0].kind != HELPER:
            raise ProcessError("FREE_HELPER takes one helper operand")


@dataclass(frozen=True)
class Process:
    """One tenant program plus its resource declaration."""

    id: str
    num_data: int
    num_helper: int
    shots: int
    instructions: tuple[VirtualInstruction, ...]
    arrival_time: float = 0.0

    def __post_init__(self):
        if not self.id or any(ch.isspace() for ch in self.id):
            raise ProcessError(f"process id {self.id!r} must be non-empty, no spaces")
        if self.num_data < 0 or self.num_helper < 0:
            raise ProcessError(f"{self.id}: negative resource declaration")
        if self.num_data + self.num_helper == 0:
            raise ProcessError(f"{self.id}: process declares no qubits")
        if self.shots < 1:
            raise ProcessError(f"{self.id}: shots must be at least 1")
        if not self.instructions:
            raise ProcessError(f"{self.id}: process has no instructions")
        errors = validate_instructions(
            self.instructions, self.num_data, self.num_helper
        )
        if errors:
            idx, msg = errors[0]
            raise ProcessError(f"{self.id}: instruction {idx}: {msg}")

    @cached_property
    def depth(self) -> int:
        return compute_depth(self.instructions)

    @cached_property
    def num_classical(self) -> int:
        idxs = [
            o.index
            for ins in self.instructions
            for o in ins.operands
            if o.kind == CLASSICAL
        ]
        return max(idxs) + 1 if idxs else 0

    def with_arrival(self, t: float) -> "Process":
        return replace(self, arrival_time=t)


def validate_instructions(
    instructions, num_data: int, num_helper: int
) -> list[tuple[int, str]]:
    """Return (index, message) pairs for every semantic violation."""
    errors = []
    live: set[int] = set()
    for idx, ins in enumerate(instructions):
        for o in ins.operands:
            if o.kind == DATA and o.index >= num_data:
                errors.append((idx, f"data qubit {o} out of range (data {num_data})"))
            elif o.kind == HELPER and o.index >= num_helper:
                errors.append(
                    (idx, f"helper qubit {o} out of range (helper {num_helper})")
                )
        if ins.opcode == "FREE_HELPER":
            h = ins.operands[0].index
            if h not in live:
                errors.append((idx, f"FREE_HELPER s{h} without a live allocation"))
            live.discard(h)
        else:
            for o in ins.operands:
                if o.kind == HELPER:
                    live.add(o.index)  # first touch opens an episode
    if live:
        stranded = ", ".join(f"s{h}" for h in sorted(live))
        errors.append((len(instructions), f"helpers never freed: {stranded}"))
    return errors


def compute_depth(instructions) -> int:
    """Longest dependency chain, counting MEASURE as one level.

    FREE_HELPER is bookkeeping, not work: it adds no level, and a helper
    re-used later continues from the level its previous episode reached.
    """
    level: dict[tuple[str, int], int] = {}
    depth = 0
    for ins in instructions:
        if ins.opcode == "FREE_HELPER":
            continue
        keys = [(o.kind, o.index) for o in ins.operands]
        lv = 1 + max((level.get(k, 0) for k in keys), default=0)
        for k in keys:
            level[k] = lv
        depth = max(depth, lv)
    return depth


def peak_helper_demand(process: Process) -> int:
    """Largest number of simultaneously live helper episodes."""
    live: set[int] = set()
    peak = 0
    for ins in process.instructions:
        if ins.opcode == "FREE_HELPER":
            live.discard(ins.operands[0].index)
        else:
            for o in ins.operands:
                if o.kind == HELPER:
                    live.add(o.index)
            peak = max(peak, len(live))
    return peak


@dataclass(frozen=True)
class ProcessStats:
    num_data: int
    num_helper: int
    shots: int
    depth: int
    depth_demand: int  # shots x depth, the scheduling priority key


def process_stats(process: Process) -> ProcessStats:
    return ProcessStats(
        num_data=process.num_data,
        num_helper=process.num_helper,
        shots=process.shots,
        depth=process.depth,
        depth_demand=process.shots * process.depth,
    )


_HEADER_KEYS = ("proc", "shots", "data", "helper")
_OPCODE_RE = re.compile(r"^([A-Z_]+)(?:\(([^()\s]+)\))?$")
_OPERAND_RE = re.compile(r"^([qsc])(\d+)$")


def parse_process(text: str, default_id: str = "P0") -> Process:
    """Parse the line-oriented text format; errors carry line numbers."""
    headers: dict[str, str] = {}
    instructions: list[VirtualInstruction] = []
    lines: list[int] = []  # source line of each instruction
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        tokens = line.split()
        if tokens[0] in _HEADER_KEYS:
            if instructions:
                raise ProcessError(
                    f"line {lineno}: header {tokens[0]!r} after instructions"
                )
            if len(tokens) != 2:
                raise ProcessError(f"line {lineno}: expected '{tokens[0]} VALUE'")
            if tokens[0] in headers:
                raise ProcessError(f"line {lineno}: duplicate header {tokens[0]!r}")
            headers[tokens[0]] = tokens[1]
            continue
        instructions.append(_parse_instruction(tokens, lineno))
        lines.append(lineno)
    for key in ("shots", "data"):
        if key not in headers:
            raise ProcessError(f"missing header {key!r}")
    try:
        shots = int(headers["shots"])
        num_data = int(headers["data"])
        num_helper = int(headers.get("helper", "0"))
    except ValueError as exc:
        raise ProcessError(f"non-integer header value: {exc}")
    errors = validate_instructions(instructions, num_data, num_helper)
    if errors:
        idx, msg = errors[0]
        where = f"line {lines[idx]}" if idx < len(lines) else "end of process"
        raise ProcessError(f"{where}: {msg}")
    return Process(
        id=headers.get("proc", default_id),
        num_data=num_data,
        num_helper=num_helper,
        shots=shots,
        instructions=tuple(instructions),
    )


def _parse_instruction(tokens: list[str], lineno: int) -> VirtualInstruction:
    m = _OPCODE_RE.match(tokens[0])
    if not m:
        raise ProcessError(f"line {lineno}: malformed opcode {tokens[0]!r}")
    opcode, param_text = m.group(1), m.group(2)
    param = None
    if param_text is not None:
        try:
            param = float(param_text)
        except ValueError:
            raise ProcessError(f"line {lineno}: bad parameter {param_text!r}")
    operands = []
    for tok in tokens[1:]:
        om = _OPERAND_RE.match(tok)
        if not om:
            raise ProcessError(f"line {lineno}: malformed operand {tok!r}")
        operands.append(VirtualOperand(_PREFIX_KIND[om.group(1)], int(om.group(2))))
    try:
        return VirtualInstruction(opcode, tuple(operands), param)
    except ProcessError as exc:
        raise ProcessError(f"line {lineno}: {exc}")


def serialize_process(process: Process) -> str:
    """Canonical text form; parse(serialize(p)) reproduces p exactly."""
    out = [
        f"proc {process.id}",
        f"shots {process.shots}",
        f"data {process.num_data}",
        f"helper {process.num_helper}",
    ]
    out.extend(str(ins) for ins in process.instructions)
    return "\n".join(out) + "\n"
