import numpy as np
import pytest

from diffwalk.graph import (
    DuplicateEdgeError,
    EmptyGraphError,
    GraphFormatError,
    SelfLoopError,
    UnknownVertexError,
    build_graph,
    cycle_graph,
    parse_graph,
    serialize_graph,
)
from conftest import random_connected_graph


def test_parse_smallest_valid_graph():
    g = parse_graph('{"vertices": ["A", "B"], "edges": [["A", "B"]]}')
    assert g.vertices == ("A", "B")
    assert g.edges == (("A", "B"),)
    assert g.degree("A") == g.degree("B") == 1


def test_parse_paper_graph(paper_graph):
    text = '{"vertices": ["A","B","C","D"], "edges": [["A","B"],["A","C"],["B","C"],["C","D"]]}'
    g = parse_graph(text)
    assert g == paper_graph
    assert g.degree("C") == 3
    assert g.neighbors("C") == ("A", "B", "D")


def test_orientation_is_canonical():
    g = build_graph(["A", "B"], [("B", "A")])
    assert g.edges == (("A", "B"),)


def test_self_loop_rejected():
    with pytest.raises(SelfLoopError):
        parse_graph('{"vertices": ["A"], "edges": [["A", "A"]]}')


def test_duplicate_edge_rejected():
    with pytest.raises(DuplicateEdgeError):
        build_graph(["A", "B"], [("A", "B"), ("B", "A")])


def test_unknown_vertex_rejected():
    with pytest.raises(UnknownVertexError):
        build_graph(["A", "B"], [("A", "Z")])


def test_empty_vertex_set_rejected():
    with pytest.raises(EmptyGraphError):
        parse_graph('{"vertices": [], "edges": []}')


@pytest.mark.parametrize("bad", ["", "a b", "a,b", 7, None])
def test_bad_vertex_names_rejected(bad):
    with pytest.raises(GraphFormatError):
        build_graph([bad], [])


def test_duplicate_vertex_rejected():
    with pytest.raises(GraphFormatError):
        build_graph(["A", "A"], [])


def test_not_json_rejected():
    with pytest.raises(GraphFormatError):
        parse_graph("vertices: A")


def test_out_neighbors_paper_graph(paper_graph):
    assert paper_graph.out_neighbors("A") == ("B", "C")
    assert paper_graph.out_neighbors("D") == ()  # D > C, so no out-edge


def test_out_neighbors_single_edge_head_side():
    g = build_graph(["A", "B"], [("A", "B")])
    assert g.out_neighbors("B") == ()


def test_out_neighbors_unknown_vertex(paper_graph):
    with pytest.raises(UnknownVertexError):
        paper_graph.neighbors("Z")


def test_cycle_graph_triangle():
    g = cycle_graph(3)
    assert g.vertices == ("0", "1", "2")
    assert all(g.degree(v) == 2 for v in g.vertices)
    assert len(g.edges) == 3


def test_cycle_graph_c15():
    g = cycle_graph(15)
    assert len(g.vertices) == 15
    assert g.vertices[0] == "00" and g.vertices[-1] == "14"
    # zero padding keeps lexicographic order numeric
    assert list(g.vertices) == sorted(g.vertices)
    assert all(g.degree(v) == 2 for v in g.vertices)
    assert g.has_edge("00", "14")


def test_cycle_graph_too_small():
    with pytest.raises(GraphFormatError):
        cycle_graph(2)


def test_degree_sum_and_edge_partition_properties():
    rng = np.random.default_rng(11)
    for _ in range(25):
        g = random_connected_graph(rng)
        assert sum(g.degree(v) for v in g.vertices) == 2 * len(g.edges)
        # out_neighbors partitions the edge set
        oriented = [(v, u) for v in g.vertices for u in g.out_neighbors(v)]
        assert sorted(oriented) == list(g.edges)


def test_serialize_parse_round_trip():
    rng = np.random.default_rng(5)
    for _ in range(10):
        g = random_connected_graph(rng)
        assert parse_graph(serialize_graph(g)) == g


def test_edge_order_in_file_is_irrelevant():
    a = parse_graph('{"vertices": ["A","B","C"], "edges": [["B","C"],["A","B"]]}')
    b = parse_graph('{"vertices": ["C","B","A"], "edges": [["A","B"],["C","B"]]}')
    assert a == b


def test_connected_components():
    g = build_graph(["A", "B", "C", "D", "E"], [("A", "B"), ("C", "D")])
    assert g.connected_components() == [("A", "B"), ("C", "D"), ("E",)]


def test_subgraph(paper_graph):
    sub = paper_graph.subgraph(["A", "B", "C"])
    assert sub.edges == (("A", "B"), ("A", "C"), ("B", "C"))
    with pytest.raises(UnknownVertexError):
        paper_graph.subgraph(["A", "Z"])


def test_isolated_vertices_are_accepted():
    g = parse_graph('{"vertices": ["A", "B", "C"], "edges": [["A", "B"]]}')
    assert g.degree("C") == 0
