import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qmux.topology import (
    HardwareGraph,
    TopologyError,
    grid_graph,
    heavy_hex_graph,
    line_graph,
    load_topology,
)


def test_line_counts():
    g = line_graph(4)
    assert g.num_qubits == 4
    assert len(g.edges) == 3
    assert g.distance(0, 3) == 3


def test_line_two_qubits():
    g = line_graph(2)
    assert g.num_qubits == 2
    assert g.edges == frozenset({(0, 1)})


def test_grid_matches_two_by_five_layout():
    g = grid_graph(2, 5)
    assert g.num_qubits == 10
    assert len(g.edges) == 13
    # row-major numbering: 0..4 top row, 5..9 bottom row
    assert (0, 1) in g.edges and (5, 6) in g.edges and (0, 5) in g.edges
    assert g.distance(0, 9) == 5
    assert g.distance(2, 7) == 1


@pytest.mark.parametrize("rows,cols", [(1, 1), (3, 3), (2, 7), (4, 4)])
def test_grid_edge_count_formula(rows, cols):
    g = grid_graph(rows, cols)
    assert len(g.edges) == 2 * rows * cols - rows - cols


def test_heavy_hex_small_hand_count():
    g = heavy_hex_graph(2, 5)
    # two 5-chains plus bridges at columns 0 and 4
    assert g.num_qubits == 12
    assert len(g.edges) == 12
    assert (0, 10) in g.edges and (5, 10) in g.edges
    assert (4, 11) in g.edges and (9, 11) in g.edges


def test_heavy_hex_desk_scale_size():
    g = heavy_hex_graph(4, 28)
    assert g.num_qubits == 133
    degrees = np.count_nonzero(g.dist == 1, axis=1)
    assert degrees.max() == 3


def test_heavy_hex_rejects_disconnected_dims():
    with pytest.raises(TopologyError):
        heavy_hex_graph(3, 2)


def test_distance_matrix_symmetric_zero_diagonal():
    g = heavy_hex_graph(2, 5)
    assert np.array_equal(g.dist, g.dist.T)
    assert np.all(np.diag(g.dist) == 0)
    assert np.all(g.dist[g.dist != 0] >= 1)


def test_disconnected_rejected():
    with pytest.raises(TopologyError):
        HardwareGraph.from_edges(4, [(0, 1), (2, 3)])


def test_self_loop_rejected():
    with pytest.raises(TopologyError):
        HardwareGraph.from_edges(2, [(0, 0), (0, 1)])


def test_out_of_range_edge_rejected():
    with pytest.raises(TopologyError):
        HardwareGraph.from_edges(2, [(0, 2)])


def test_descriptor_forms():
    assert load_topology("grid:2,5") == grid_graph(2, 5)
    assert load_topology("grid(2,5)") == grid_graph(2, 5)
    assert load_topology("line:6") == line_graph(6)
    assert load_topology("heavyhex:4,28") == heavy_hex_graph(4, 28)


def test_descriptor_errors():
    with pytest.raises(TopologyError):
        load_topology("grid:5")
    with pytest.raises(TopologyError):
        load_topology("no/such/file.edges")


def test_edge_list_file(tmp_path):
    p = tmp_path / "dev.edges"
    p.write_text("# tiny triangle\n0 1\n1 2\n0 2  # closing edge\n")
    g = load_topology(p)
    assert g.num_qubits == 3
    assert len(g.edges) == 3


def test_edge_list_file_bad_line(tmp_path):
    p = tmp_path / "bad.edges"
    p.write_text("0 1\n1 two\n")
    with pytest.raises(TopologyError, match="bad.edges:2"):
        load_topology(p)


def test_adjacency_csr_roundtrip():
    g = grid_graph(2, 5)
    indptr, indices = g.adjacency_csr()
    for v in range(g.num_qubits):
        assert tuple(indices[indptr[v] : indptr[v + 1]]) == g.neighbors(v)


@st.composite
def connected_graphs(draw):
    n = draw(st.integers(min_value=2, max_value=12))
    # random spanning tree keeps it connected, then extra edges
    edges = set()
    for v in range(1, n):
        u = draw(st.integers(min_value=0, max_value=v - 1))
        edges.add((u, v))
    extra = draw(
        st.lists(
            st.tuples(
                st.integers(min_value=0, max_value=n - 1),
                st.integers(min_value=0, max_value=n - 1),
            ),
            max_size=8,
        )
    )
    for u, v in extra:
        if u != v:
            edges.add((min(u, v), max(u, v)))
    return n, edges


@settings(max_examples=60, deadline=None)
@given(connected_graphs())
def test_distances_satisfy_triangle_inequality(graph):
    n, edges = graph
    g = HardwareGraph.from_edges(n, edges)
    d = g.dist.astype(np.int64)
    # d(a,c) <= d(a,b) + d(b,c) for all triples
    via = d[:, :, None] + d[None, :, :]
    assert np.all(d[:, None, :] <= via)
    # adjacent vertices are exactly one hop apart
    for u, v in edges:
        assert g.distance(u, v) == 1
