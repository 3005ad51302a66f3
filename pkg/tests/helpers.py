"""Shared test fixtures: hand-built processes with exact resource shapes."""

from qmux.process import Process, VirtualInstruction, data_q, helper_q


def synthetic_process(
    pid: str, num_data: int, depth: int, shots: int, arrival: float = 0.0
) -> Process:
    """A process whose declared sizes are exactly (num_data, depth, shots)."""
    body = tuple(
        VirtualInstruction("H", (data_q(0),)) for _ in range(depth)
    )
    return Process(
        id=pid,
        num_data=num_data,
        num_helper=0,
        shots=shots,
        instructions=body,
        arrival_time=arrival,
    )


def gate_shape_process(
    pid: str,
    num_data: int,
    pair_gates: dict | None = None,
    helper_gates: dict | None = None,
    shots: int = 1,
) -> Process:
    """A process with exact data-data pair counts and per-data helper-gate counts.

    pair_gates: {(i, j): count} -> count CX gates between data i and j.
    helper_gates: {i: count}    -> count CX gates between data i and s0.
    """
    body = []
    for (i, j), w in (pair_gates or {}).items():
        body.extend(
            VirtualInstruction("CX", (data_q(i), data_q(j))) for _ in range(w)
        )
    uses_helper = False
    for i, w in (helper_gates or {}).items():
        uses_helper = uses_helper or w > 0
        body.extend(
            VirtualInstruction("CX", (data_q(i), helper_q(0))) for _ in range(w)
        )
    if uses_helper:
        body.append(VirtualInstruction("FREE_HELPER", (helper_q(0),)))
    if not body:
        body.append(VirtualInstruction("H", (data_q(0),)))
    return Process(
        id=pid,
        num_data=num_data,
        num_helper=1 if uses_helper else 0,
        shots=shots,
        instructions=tuple(body),
    )
