"""Tests for graph_core module."""

import itertools
import logging

import networkx as nx
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fcds_packing.graph_core import (
    INFINITE_DIAMETER,
    Graph,
    GraphFormatError,
    GraphParameterError,
    diameter,
    generate_harary,
    generate_ring_clique,
    graph_stats,
    is_connected,
    load_graph,
    save_graph,
    vertex_connectivity,
)
from tests.strategies import connected_graphs, graphs


def brute_force_connectivity(graph: Graph) -> int:
    """Smallest vertex set whose removal disconnects the graph, by exhaustion."""
    n = graph.node_count
    g = graph.to_networkx()
    if not nx.is_connected(g):
        return 0
    for size in range(n - 1):
        for removed in itertools.combinations(range(n), size):
            rest = g.subgraph(set(range(n)) - set(removed))
            if rest.number_of_nodes() > 1 and not nx.is_connected(rest):
                return size
    return n - 1


def cycle(n: int) -> Graph:
    return Graph(n, [(i, (i + 1) % n) for i in range(n)])


class TestGraph:
    """Tests for the Graph type."""

    def test_edges_are_normalized(self):
        """Test that edges are stored once with the smaller id first."""
        graph = Graph(3, [(1, 0), (0, 1), (2, 1)])
        assert graph.edges == frozenset({(0, 1), (1, 2)})

    def test_adjacency_is_symmetric(self):
        """Test that neighbours are recorded in both directions."""
        graph = Graph(3, [(0, 2)])
        assert graph.has_edge(0, 2)
        assert graph.has_edge(2, 0)
        assert graph.neighbors(1) == frozenset()

    def test_self_loop_rejected(self):
        """Test that self-loops raise."""
        with pytest.raises(GraphFormatError):
            Graph(2, [(1, 1)])

    def test_out_of_range_rejected(self):
        """Test that ids outside 0..n-1 raise."""
        with pytest.raises(GraphFormatError):
            Graph(2, [(0, 2)])

    def test_closed_neighborhood_contains_node(self):
        """Test that the closed neighbourhood adds the node itself."""
        graph = Graph(3, [(0, 1)])
        assert graph.closed_neighborhood(0) == frozenset({0, 1})


class TestLoadSave:
    """Tests for the edge-list format."""

    def test_minimal_graph(self, tmp_path):
        """Test loading a header and a single edge."""
        path = tmp_path / "g.txt"
        path.write_text("n 2\n0 1\n")

        graph = load_graph(path)

        assert graph.node_count == 2
        assert graph.edges == frozenset({(0, 1)})

    def test_duplicate_edge_warns(self, tmp_path, caplog):
        """Test that a repeated edge is kept once and logged."""
        path = tmp_path / "g.txt"
        path.write_text("n 2\n0 1\n0 1\n")

        with caplog.at_level(logging.WARNING):
            graph = load_graph(path)

        assert len(graph.edges) == 1
        assert "duplicate edge" in caplog.text

    def test_self_loop_line(self, tmp_path):
        """Test that a self-loop line is an error."""
        path = tmp_path / "g.txt"
        path.write_text("n 2\n0 0\n")

        with pytest.raises(GraphFormatError, match="self-loop"):
            load_graph(path)

    def test_comments_and_blank_lines(self, tmp_path):
        """Test that comments and blank lines are skipped."""
        path = tmp_path / "g.txt"
        path.write_text("# a triangle\n\nn 3\n0 1\n# middle\n1 2\n0 2\n")

        assert len(load_graph(path).edges) == 3

    def test_missing_header(self, tmp_path):
        """Test that an edge before the header is rejected."""
        path = tmp_path / "g.txt"
        path.write_text("0 1\n")

        with pytest.raises(GraphFormatError, match="header"):
            load_graph(path)

    def test_malformed_line(self, tmp_path):
        """Test that a three-token line is rejected."""
        path = tmp_path / "g.txt"
        path.write_text("n 3\n0 1 2\n")

        with pytest.raises(GraphFormatError):
            load_graph(path)

    def test_id_out_of_range(self, tmp_path):
        """Test that node ids beyond the header count are rejected."""
        path = tmp_path / "g.txt"
        path.write_text("n 2\n0 5\n")

        with pytest.raises(GraphFormatError, match="out of range"):
            load_graph(path)

    def test_save_complete_graph(self, tmp_path):
        """Test that K4 is written as a header and six sorted edge lines."""
        path = tmp_path / "k4.txt"
        save_graph(generate_harary(4, 3), path)

        lines = path.read_text().splitlines()
        assert lines[0] == "n 4"
        assert lines[1:] == ["0 1", "0 2", "0 3", "1 2", "1 3", "2 3"]

    def test_save_edgeless_graph(self, tmp_path):
        """Test that a graph without edges is just a header."""
        path = tmp_path / "empty.txt"
        save_graph(Graph(3), path)

        assert path.read_text() == "n 3\n"

    def test_round_trip_harary(self, tmp_path):
        """Test that saving and loading Harary(8,4) keeps the edge set."""
        graph = generate_harary(8, 4)
        path = tmp_path / "h.txt"
        save_graph(graph, path)

        assert load_graph(path) == graph

    @given(graph=graphs(max_nodes=12))
    @settings(max_examples=100, deadline=None)
    def test_round_trip_random(self, graph, tmp_path_factory):
        """Test the save/load round trip on random graphs."""
        path = tmp_path_factory.mktemp("graphs") / "g.txt"
        save_graph(graph, path)

        assert load_graph(path) == graph


class TestGenerators:
    """Tests for the Harary and ring-clique generators."""

    def test_harary_complete(self):
        """Test that H_{3,4} is K4."""
        graph = generate_harary(4, 3)
        assert len(graph.edges) == 6

    def test_harary_cycle(self):
        """Test that H_{2,5} is the 5-cycle."""
        assert generate_harary(5, 2) == cycle(5)

    def test_harary_8_4(self):
        """Test the edge count and connectivity of H_{4,8}."""
        graph = generate_harary(8, 4)
        assert len(graph.edges) == 16
        assert vertex_connectivity(graph) == 4

    def test_harary_odd_odd(self):
        """Test that odd k on odd n still gives connectivity k."""
        graph = generate_harary(9, 5)
        assert vertex_connectivity(graph) == 5
        assert graph.min_degree() == 5

    @pytest.mark.parametrize("n,k", [(3, 5), (4, 4), (6, 1)])
    def test_harary_invalid(self, n, k):
        """Test that k >= n and k < 2 are rejected."""
        with pytest.raises(GraphParameterError):
            generate_harary(n, k)

    @given(n=st.integers(4, 12), data=st.data())
    @settings(max_examples=30, deadline=None)
    def test_harary_connectivity_is_k(self, n, data):
        """Test that every generated Harary graph is exactly k-connected."""
        k = data.draw(st.integers(2, n - 1))
        graph = generate_harary(n, k)

        assert vertex_connectivity(graph) == k

    def test_ring_clique_single_ring(self):
        """Test that one ring of three is a triangle."""
        assert generate_ring_clique(1, 3) == cycle(3)

    def test_ring_clique_max_degree(self):
        """Test that the clique nodes have degree d+1."""
        graph = generate_ring_clique(4, 8)
        assert graph.node_count == 32
        assert graph.max_degree() == 5

    def test_ring_clique_connectivity_measured(self):
        """Test that plain ring nodes cap the connectivity at their degree 2."""
        graph = generate_ring_clique(4, 8)
        assert vertex_connectivity(graph) == 1

    def test_ring_clique_invalid(self):
        """Test that rings shorter than three are rejected."""
        with pytest.raises(GraphParameterError):
            generate_ring_clique(2, 2)


class TestConnectivity:
    """Tests for the max-flow vertex connectivity oracle."""

    def test_complete_graph(self):
        """Test that K5 has connectivity 4."""
        assert vertex_connectivity(generate_harary(5, 4)) == 4

    def test_cycle(self):
        """Test that C6 has connectivity 2."""
        assert vertex_connectivity(cycle(6)) == 2

    def test_petersen(self):
        """Test that the Petersen graph has connectivity 3."""
        petersen = nx.petersen_graph()
        graph = Graph(10, petersen.edges())
        assert vertex_connectivity(graph) == 3
        assert brute_force_connectivity(graph) == 3

    def test_disconnected(self):
        """Test that a disconnected graph has connectivity 0."""
        assert vertex_connectivity(Graph(4, [(0, 1), (2, 3)])) == 0

    @given(graph=graphs(min_nodes=2, max_nodes=8))
    @settings(max_examples=50, deadline=None)
    def test_matches_exhaustive_removal(self, graph):
        """Test agreement with removing every vertex subset."""
        assert vertex_connectivity(graph) == brute_force_connectivity(graph)

    @given(graph=connected_graphs(max_nodes=10))
    @settings(max_examples=30, deadline=None)
    def test_matches_networkx(self, graph):
        """Test agreement with networkx's own node connectivity."""
        assert vertex_connectivity(graph) == nx.node_connectivity(graph.to_networkx())


class TestGraphStats:
    """Tests for graph_stats."""

    def test_k4(self):
        """Test the statistics of K4."""
        stats = graph_stats(generate_harary(4, 3))
        assert (stats.n, stats.m, stats.max_degree, stats.diameter, stats.vertex_connectivity) == (4, 6, 3, 1, 3)

    def test_path(self):
        """Test the statistics of the path on three nodes."""
        stats = graph_stats(Graph(3, [(0, 1), (1, 2)]))
        assert (stats.n, stats.m, stats.max_degree, stats.diameter, stats.vertex_connectivity) == (3, 2, 2, 2, 1)

    def test_harary(self):
        """Test connectivity and degree of Harary(8,4)."""
        stats = graph_stats(generate_harary(8, 4))
        assert stats.vertex_connectivity == 4
        assert stats.max_degree == 4

    def test_disconnected_diameter(self):
        """Test the infinity sentinel and its serialized form."""
        graph = Graph(4, [(0, 1), (2, 3)])
        assert not is_connected(graph)
        assert diameter(graph) == INFINITE_DIAMETER
        assert graph_stats(graph).as_dict()["diameter"] == "inf"

    def test_summary_line(self):
        """Test the one-line summary printed by the generator command."""
        line = graph_stats(generate_harary(8, 4)).summary_line()
        assert line == "n=8 m=16 max_degree=4 diameter=2 kappa=4"

    @given(graph=connected_graphs(max_nodes=10))
    @settings(max_examples=30, deadline=None)
    def test_diameter_is_max_eccentricity(self, graph):
        """Test that the diameter equals the largest BFS eccentricity."""
        g = graph.to_networkx()
        expected = max(max(nx.single_source_shortest_path_length(g, v).values()) for v in g)
        assert diameter(graph) == expected
