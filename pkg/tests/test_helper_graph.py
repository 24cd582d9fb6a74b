"""Tests for helper_graph module."""

import pytest

from fcds_packing.components import ClassAssignment, identify_components
from fcds_packing.congest_sim import CongestNetwork
from fcds_packing.graph_core import Graph
from fcds_packing.helper_graph import (
    ConnectorPath,
    HelperEdge,
    HelperGraph,
    HelperGraphInvariantError,
    HelperNode,
    PathKind,
    build_helper_graph,
    distributed_maximal_matching,
    matching_round_cap,
)
from fcds_packing.oracle_verifier import check_matching
from fcds_packing.virtual_graph import NodeKind, VirtualGraph, VirtualNodeId


def lower(real):
    return VirtualNodeId(real, 1, NodeKind.LOWER)


def setup_layer(graph, classes, seed=0):
    """One lower layer with the given classes, components identified for layer 2."""
    vg = VirtualGraph(graph, 1)
    assignment = ClassAssignment(max(classes))
    for real, class_id in enumerate(classes):
        assignment.assign(lower(real), class_id)
    net = CongestNetwork(graph, seed=seed, id_space=vg.node_count)
    components = identify_components(vg, 2, assignment, net, max_rounds=200)
    return vg, components, net


@pytest.fixture
def gap_path():
    """Path 0-1-2-3 whose class-1 copies sit at both ends."""
    return setup_layer(Graph(4, [(0, 1), (1, 2), (2, 3)]), [1, 2, 2, 1])


@pytest.fixture
def contested():
    """
    Node 3 is the only type-1 candidate for two type-2 offers of component v(0).

    Edges 0-1, 0-2, 1-3, 2-3, 3-4; classes 1 2 2 2 1.
    """
    graph = Graph(5, [(0, 1), (0, 2), (1, 3), (2, 3), (3, 4)])
    return setup_layer(graph, [1, 2, 2, 2, 1])


class TestConnectorPath:
    """Tests for the path value type."""

    def test_helper_pair(self):
        """Test that only long paths expose a helper pair."""
        v = VirtualNodeId(1, 2, NodeKind.TYPE2)
        w = VirtualNodeId(2, 2, NodeKind.TYPE1)
        long_path = ConnectorPath(PathKind.LONG, lower(0), (v, w), lower(3), lower(0), lower(3))
        short_path = ConnectorPath(PathKind.SHORT, lower(0), (w,), lower(3), lower(0), lower(3))

        assert long_path.helper_pair == (v, w)
        assert short_path.helper_pair is None


class TestBuildHelperGraph:
    """Tests for distributed helper graph construction."""

    def test_gap_path_edges(self, gap_path):
        """Test that each end component gets the long path through the middle."""
        vg, components, net = gap_path
        h = build_helper_graph(vg, 2, 1, components, net)

        assert h.edges == (
            HelperEdge(vg.type2(1, 2), vg.type1(2, 2), lower(0)),
            HelperEdge(vg.type2(2, 2), vg.type1(1, 2), lower(3)),
        )
        assert h.components() == [lower(0), lower(3)]
        assert h.node_count == 4
        h.check_invariants(vg)

    def test_round_budget(self, gap_path):
        """Test that construction stays within Δ+2 rounds."""
        vg, components, net = gap_path
        h = build_helper_graph(vg, 2, 1, components, net)

        assert h.rounds == 3
        assert h.rounds <= vg.base.max_degree() + 2

    def test_offers_without_partners(self, gap_path):
        """Test that class 2 gets offers but no edges: every neighbour is near its only component."""
        vg, components, net = gap_path
        h = build_helper_graph(vg, 2, 2, components, net)

        assert h.edges == ()
        assert {n.node for n in h.type2_nodes()} == {vg.type2(0, 2), vg.type2(3, 2)}
        assert h.type1_nodes() == []

    def test_contested_type1(self, contested):
        """Test that one type-1 copy accepts several offers over successive rounds."""
        vg, components, net = contested
        h = build_helper_graph(vg, 2, 1, components, net)

        assert set(h.component_edges(lower(0))) == {
            HelperEdge(vg.type2(1, 2), vg.type1(3, 2), lower(0)),
            HelperEdge(vg.type2(2, 2), vg.type1(3, 2), lower(0)),
        }
        assert set(h.component_edges(lower(4))) == {
            HelperEdge(vg.type2(3, 2), vg.type1(1, 2), lower(4)),
            HelperEdge(vg.type2(3, 2), vg.type1(2, 2), lower(4)),
        }
        assert h.rounds == 4
        assert len(h.incident(HelperNode(vg.type1(3, 2), lower(0)))) == 2

    def test_class_everywhere(self):
        """Test that a class held by every node makes no offers but still pays the offer round."""
        vg, components, net = setup_layer(Graph(3, [(0, 1), (1, 2)]), [1, 1, 1])
        h = build_helper_graph(vg, 2, 1, components, net)

        assert h.edges == ()
        assert h.rounds == 1

    def test_lower_layer_rejected(self, gap_path):
        """Test that helper graphs need an upper layer."""
        vg, components, net = gap_path
        with pytest.raises(ValueError):
            build_helper_graph(vg, 1, 1, components, net)


class TestInvariants:
    """Tests for HelperGraph.check_invariants."""

    def _graph(self, vg, edges):
        nodes = frozenset(n for e in edges for n in e.endpoints())
        return HelperGraph(class_id=1, layer=2, nodes=nodes, edges=tuple(edges))

    def test_same_real_edge(self, gap_path):
        """Test that an edge between copies of one real node is refused."""
        vg, _, _ = gap_path
        h = self._graph(vg, [HelperEdge(vg.type2(1, 2), vg.type1(1, 2), lower(0))])
        with pytest.raises(HelperGraphInvariantError, match="not real neighbours"):
            h.check_invariants(vg)

    def test_non_adjacent_edge(self, gap_path):
        """Test that an edge between non-neighbours is refused."""
        vg, _, _ = gap_path
        h = self._graph(vg, [HelperEdge(vg.type2(0, 2), vg.type1(3, 2), lower(0))])
        with pytest.raises(HelperGraphInvariantError):
            h.check_invariants(vg)

    def test_two_type2_copies(self, gap_path):
        """Test that a real node may stand for one component only on the type-2 side."""
        vg, _, _ = gap_path
        h = self._graph(vg, [
            HelperEdge(vg.type2(1, 2), vg.type1(2, 2), lower(0)),
            HelperEdge(vg.type2(1, 2), vg.type1(0, 2), lower(3)),
        ])
        with pytest.raises(HelperGraphInvariantError, match="type-2 copies"):
            h.check_invariants(vg)

    def test_wrong_layer(self, gap_path):
        """Test that nodes of another layer are refused."""
        vg, _, _ = gap_path
        h = HelperGraph(class_id=1, layer=2, nodes=frozenset({HelperNode(lower(0), lower(0))}), edges=())
        with pytest.raises(HelperGraphInvariantError, match="not on layer"):
            h.check_invariants(vg)


class TestMatching:
    """Tests for the distributed maximal matching."""

    def test_disjoint_edges_all_matched(self, gap_path):
        """Test that two independent edges are matched in one matching round."""
        vg, components, net = gap_path
        h = build_helper_graph(vg, 2, 1, components, net)
        matching = distributed_maximal_matching(h, net)

        assert matching.edges == h.edges
        assert matching.matching_rounds == 1
        assert not matching.truncated
        assert matching.partner_of(vg.type2(1, 2)).type1 == vg.type1(2, 2)
        assert matching.partner_of(vg.type2(0, 2)) is None

    @pytest.mark.parametrize("seed", range(6))
    def test_contested_is_maximum(self, seed):
        """Test that contention still yields one edge per component."""
        graph = Graph(5, [(0, 1), (0, 2), (1, 3), (2, 3), (3, 4)])
        vg, components, net = setup_layer(graph, [1, 2, 2, 2, 1], seed=seed)
        h = build_helper_graph(vg, 2, 1, components, net)
        matching = distributed_maximal_matching(h, net)

        check = check_matching(h, matching.edges)
        assert check.maximal
        assert check.ratio_ok
        assert len(matching) == check.maximum == 2
        assert matching.max_edge_load <= 2

    def test_round_budget(self, contested):
        """Test that every matching round fits in Δ+2 simulator rounds."""
        vg, components, net = contested
        h = build_helper_graph(vg, 2, 1, components, net)
        matching = distributed_maximal_matching(h, net)

        assert matching.rounds <= matching.matching_rounds * (vg.base.max_degree() + 2)

    def test_empty_graph(self, gap_path):
        """Test that an edgeless helper graph needs no rounds."""
        vg, components, net = gap_path
        h = build_helper_graph(vg, 2, 2, components, net)
        before = net.round

        matching = distributed_maximal_matching(h, net)

        assert matching.edges == ()
        assert net.round == before

    def test_zero_cap_truncates(self, contested, caplog):
        """Test that a cap of zero matching rounds truncates and warns."""
        vg, components, net = contested
        h = build_helper_graph(vg, 2, 1, components, net)

        matching = distributed_maximal_matching(h, net, max_matching_rounds=0)

        assert matching.truncated
        assert matching.edges == ()
        assert "truncated" in caplog.text

    def test_cap_formula(self):
        """Test the matching round cap for a few id spaces."""
        assert matching_round_cap(2) == 8
        assert matching_round_cap(1024) == 80
        assert matching_round_cap(1025) == 88
