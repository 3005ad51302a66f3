"""Device coupling graphs with precomputed hop distances.

A hardware target is an undirected connected graph over qubit indices
0..n-1.  Everything downstream (placement cost, helper binding) works in
hop counts, so the all-pairs BFS distance matrix is computed once at
construction and shared.
"""

from __future__ import annotations

import re
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np


class TopologyError(ValueError):
    """Malformed, disconnected, or out-of-range graph description."""


@dataclass(frozen=True)
class HardwareGraph:
    """Immutable coupling graph: vertex count, edge set, hop distances."""

    num_qubits: int
    edges: frozenset[tuple[int, int]]  # canonical (lo, hi) pairs
    dist: np.ndarray  # int32, shape (n, n), hop counts
    name: str = ""
    _neighbors: tuple[tuple[int, ...], ...] = field(repr=False, default=())

    @staticmethod
    def from_edges(
        num_qubits: int, edges, name: str = ""
    ) -> "HardwareGraph":
        if num_qubits < 1:
            raise TopologyError("graph needs at least one qubit")
        canon = set()
        for u, v in edges:
            if not (0 <= u < num_qubits and 0 <= v < num_qubits):
                raise TopologyError(f"edge ({u}, {v}) out of range for {num_qubits} qubits")
            if u == v:
                raise TopologyError(f"self-loop on qubit {u}")
            canon.add((min(u, v), max(u, v)))
        adj: list[list[int]] = [[] for _ in range(num_qubits)]
        for u, v in canon:
            adj[u].append(v)
            adj[v].append(u)
        neighbors = tuple(tuple(sorted(a)) for a in adj)
        dist = _bfs_all_pairs(num_qubits, neighbors)
        if dist.max(initial=0) >= _UNREACHED or (num_qubits > 1 and not canon):
            raise TopologyError("graph is disconnected")
        dist.flags.writeable = False
        return HardwareGraph(num_qubits, frozenset(canon), dist, name, neighbors)

    def neighbors(self, v: int) -> tuple[int, ...]:
        return self._neighbors[v]

    def distance(self, a: int, b: int) -> int:
        if not (0 <= a < self.num_qubits and 0 <= b < self.num_qubits):
            raise TopologyError(f"qubit index out of range: ({a}, {b})")
        return int(self.dist[a, b])

    def adjacency_csr(self) -> tuple[np.ndarray, np.ndarray]:
        """Flat (indptr, indices) form of the neighbor lists, int32."""
        indptr = np.zeros(self.num_qubits + 1, dtype=np.int32)
        for v, nbrs in enumerate(self._neighbors):
            indptr[v + 1] = indptr[v] + len(nbrs)
        indices = np.fromiter(
            (w for nbrs in self._neighbors for w in nbrs),
            dtype=np.int32,
            count=int(indptr[-1]),
        )
        return indptr, indices

    def __eq__(self, other):
        if not isinstance(other, HardwareGraph):
            return NotImplemented
        return self.num_qubits == other.num_qubits and self.edges == other.edges

    def __hash__(self):
        return hash((self.num_qubits, self.edges))


_UNREACHED = np.iinfo(np.int32).max


def _bfs_all_pairs(n: int, neighbors) -> np.ndarray:
    dist = np.full((n, n), _UNREACHED, dtype=np.int32)
    for src in range(n):
        row = dist[src]
        row[src] = 0
        queue = deque([src])
        while queue:
            v = queue.popleft()
            dv = row[v]
            for w in neighbors[v]:
                if row[w] == _UNREACHED:
                    row[w] = dv + 1
                    queue.append(w)
    return dist


def line_graph(n: int) -> HardwareGraph:
    """Chain of n qubits."""
    if n < 1:
        raise TopologyError("line needs at least one qubit")
    return HardwareGraph.from_edges(n, [(i, i + 1) for i in range(n - 1)], f"line({n})")


def grid_graph(rows: int, cols: int) -> HardwareGraph:
    """rows x cols lattice, numbered row-major."""
    if rows < 1 or cols < 1:
        raise TopologyError("grid dimensions must be positive")
    edges = []
    for r in range(rows):
        for c in range(cols):
            v = r * cols + c
            if c + 1 < cols:
                edges.append((v, v + 1))
            if r + 1 < rows:
                edges.append((v, v + cols))
    return HardwareGraph.from_edges(rows * cols, edges, f"grid({rows},{cols})")


def heavy_hex_graph(rows: int, cols: int) -> HardwareGraph:
    """Sparse lattice of row chains joined by bridge qubits.

    Row qubits are numbered row-major (rows x cols); bridge qubits follow.
    Between rows i and i+1 a bridge sits at every column j with
    j % 4 == 0 for even i and j % 4 == 2 for odd i, giving the staggered
    degree-3 pattern of heavy-hexagon devices.
    """
    if rows < 1 or cols < 1:
        raise TopologyError("heavyhex dimensions must be positive")
    if rows > 2 and cols < 3:
        raise TopologyError("heavyhex with more than two rows needs at least 3 columns")
    edges = []
    for r in range(rows):
        base = r * cols
        edges.extend((base + c, base + c + 1) for c in range(cols - 1))
    nxt = rows * cols
    for r in range(rows - 1):
        offset = 0 if r % 2 == 0 else 2
        for c in range(offset, cols, 4):
            edges.append((r * cols + c, nxt))
            edges.append(((r + 1) * cols + c, nxt))
            nxt += 1
    return HardwareGraph.from_edges(nxt, edges, f"heavyhex({rows},{cols})")


_DESCRIPTOR = re.compile(
    r"^\s*(line|grid|heavyhex)\s*[(:]\s*(\d+)\s*(?:,\s*(\d+)\s*)?\)?\s*$"
)


def load_topology(source: str | Path) -> HardwareGraph:
    """Build a graph from a descriptor string or an edge-list file.

    Descriptors: ``line:N``, ``grid:R,C``, ``heavyhex:R,C`` (parentheses
    also accepted, e.g. ``grid(2,5)``).  Anything else is treated as a
    path to a file of ``u v`` lines with ``#`` comments.
    """
    text = str(source)
    m = _DESCRIPTOR.match(text)
    if m:
        kind, a, b = m.group(1), int(m.group(2)), m.group(3)
        if kind == "line":
            if b is not None:
                raise TopologyError("line takes a single size")
            return line_graph(a)
        if b is None:
            raise TopologyError(f"{kind} needs two dimensions")
        if kind == "grid":
            return grid_graph(a, int(b))
        return heavy_hex_graph(a, int(b))
    path = Path(text)
    if not path.exists():
        raise TopologyError(
            f"{text!r} is neither a topology descriptor nor an existing file"
        )
    return _load_edge_list(path)


def _load_edge_list(path: Path) -> HardwareGraph:
    edges = []
    max_idx = -1
    for lineno, raw in enumerate(path.read_text().splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 2:
            raise TopologyError(f"{path}:{lineno}: expected 'u v', got {raw!r}")
        try:
            u, v = int(parts[0]), int(parts[1])
        except ValueError:
            raise TopologyError(f"{path}:{lineno}: non-integer qubit index in {raw!r}")
        if u < 0 or v < 0:
            raise TopologyError(f"{path}:{lineno}: negative qubit index")
        edges.append((u, v))
        max_idx = max(max_idx, u, v)
    if not edges:
        raise TopologyError(f"{path}: no edges found")
    return HardwareGraph.from_edges(max_idx + 1, edges, path.name)
