"""Real network graphs: representation, generators, structural oracles and edge-list I/O."""

import logging
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, FrozenSet, Iterable, Iterator, List, Optional, Set, Tuple, Union

import networkx as nx

logger = logging.getLogger(__name__)

Edge = Tuple[int, int]

INFINITE_DIAMETER = math.inf


class GraphFormatError(Exception):
    """Raised when an edge-list file or edge set is malformed."""
    pass


class GraphParameterError(ValueError):
    """Raised when a generator is called with invalid parameters."""
    pass


def _normalize_edge(u: int, v: int) -> Edge:
    return (u, v) if u < v else (v, u)


class Graph:
    """Immutable undirected simple graph over node ids 0..n-1."""

    __slots__ = ("_n", "_edges", "_adjacency")

    def __init__(self, node_count: int, edges: Iterable[Edge] = ()):
        if node_count < 1:
            raise GraphFormatError(f"Graph needs at least one node, got n={node_count}")

        normalized: Set[Edge] = set()
        for u, v in edges:
            if u == v:
                raise GraphFormatError(f"Self-loop on node {u} is not allowed")
            for node in (u, v):
                if not 0 <= node < node_count:
                    raise GraphFormatError(
                        f"Node id {node} out of range for n={node_count}"
                    )
            normalized.add(_normalize_edge(u, v))

        adjacency: List[Set[int]] = [set() for _ in range(node_count)]
        for u, v in normalized:
            adjacency[u].add(v)
            adjacency[v].add(u)

        self._n = node_count
        self._edges: FrozenSet[Edge] = frozenset(normalized)
        self._adjacency: Tuple[FrozenSet[int], ...] = tuple(frozenset(a) for a in adjacency)

    @property
    def node_count(self) -> int:
        return self._n

    @property
    def edges(self) -> FrozenSet[Edge]:
        """Edges as normalized pairs (u, v) with u < v."""
        return self._edges

    def nodes(self) -> range:
        return range(self._n)

    def neighbors(self, node: int) -> FrozenSet[int]:
        return self._adjacency[node]

    def degree(self, node: int) -> int:
        return len(self._adjacency[node])

    def has_edge(self, u: int, v: int) -> bool:
        return v in self._adjacency[u]

    def closed_neighborhood(self, node: int) -> FrozenSet[int]:
        return self._adjacency[node] | {node}

    def sorted_edges(self) -> List[Edge]:
        return sorted(self._edges)

    def max_degree(self) -> int:
        return max(len(a) for a in self._adjacency)

    def min_degree(self) -> int:
        return min(len(a) for a in self._adjacency)

    def to_networkx(self) -> nx.Graph:
        g = nx.Graph()
        g.add_nodes_from(range(self._n))
        g.add_edges_from(self._edges)
        return g

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Graph):
            return NotImplemented
        return self._n == other._n and self._edges == other._edges

    def __hash__(self) -> int:
        return hash((self._n, self._edges))

    def __iter__(self) -> Iterator[int]:
        return iter(range(self._n))

    def __repr__(self) -> str:
        return f"Graph(n={self._n}, m={len(self._edges)})"


@dataclass(frozen=True)
class GraphStats:
    """Exact structural statistics of a graph."""
    n: int
    m: int
    max_degree: int
    diameter: Union[int, float]
    vertex_connectivity: int

    def as_dict(self) -> Dict[str, object]:
        diameter: object = self.diameter
        if diameter == INFINITE_DIAMETER:
            diameter = "inf"
        return {
            "n": self.n,
            "m": self.m,
            "max_degree": self.max_degree,
            "diameter": diameter,
            "vertex_connectivity": self.vertex_connectivity,
        }

    def summary_line(self) -> str:
        diameter = "inf" if self.diameter == INFINITE_DIAMETER else str(self.diameter)
        return (
            f"n={self.n} m={self.m} max_degree={self.max_degree} "
            f"diameter={diameter} kappa={self.vertex_connectivity}"
        )


def load_graph(path: Union[str, Path]) -> Graph:
    """
    Load a graph from the edge-list text format.

    The first non-comment line must be "n <count>", every following
    non-comment line "u v". Lines starting with '#' and blank lines are
    ignored. Duplicate edges are dropped with a warning.

    Raises:
        GraphFormatError: malformed header or line, id out of range, self-loop.
    """
    path = Path(path)
    node_count: Optional[int] = None
    edges: Set[Edge] = set()

    with open(path, "r", encoding="utf-8") as f:
        for line_number, raw in enumerate(f, start=1):
            line = raw.strip()
            if not line or line.startswith("#"):
                continue

            parts = line.split()

            if node_count is None:
                if len(parts) != 2 or parts[0] != "n":
                    raise GraphFormatError(
                        f"{path}:{line_number}: expected header 'n <count>', got {line!r}"
                    )
                node_count = _parse_int(parts[1], path, line_number)
                if node_count < 1:
                    raise GraphFormatError(
                        f"{path}:{line_number}: node count must be at least 1"
                    )
                continue

            if len(parts) != 2:
                raise GraphFormatError(
                    f"{path}:{line_number}: expected 'u v', got {line!r}"
                )

            u = _parse_int(parts[0], path, line_number)
            v = _parse_int(parts[1], path, line_number)

            if u == v:
                raise GraphFormatError(f"{path}:{line_number}: self-loop on node {u}")
            for node in (u, v):
                if not 0 <= node < node_count:
                    raise GraphFormatError(
                        f"{path}:{line_number}: node id {node} out of range for n={node_count}"
                    )

            edge = _normalize_edge(u, v)
            if edge in edges:
                logger.warning("%s:%d: duplicate edge %d-%d ignored", path, line_number, u, v)
                continue
            edges.add(edge)

    if node_count is None:
        raise GraphFormatError(f"{path}: missing header 'n <count>'")

    return Graph(node_count, edges)


def _parse_int(token: str, path: Path, line_number: int) -> int:
    try:
        value = int(token)
    except ValueError:
        raise GraphFormatError(f"{path}:{line_number}: not an integer: {token!r}")
    if value < 0:
        raise GraphFormatError(f"{path}:{line_number}: negative value {value}")
    return value


def save_graph(graph: Graph, path: Union[str, Path]) -> None:
    """Write a graph in the edge-list text format, edges in ascending order."""
    lines = [f"n {graph.node_count}\n"]
    lines.extend(f"{u} {v}\n" for u, v in graph.sorted_edges())

    with open(path, "w", encoding="utf-8") as f:
        f.writelines(lines)


def generate_harary(n: int, k: int) -> Graph:
    """
    Build the Harary graph H_{k,n}, the n-node graph that is exactly
    k-vertex-connected with the minimum number of edges.

    Args:
        n: Number of nodes.
        k: Target connectivity, 2 <= k < n.
    """
    if k < 2 or k >= n:
        raise GraphParameterError(f"Harary graph needs 2 <= k < n, got n={n}, k={k}")

    edges: Set[Edge] = set()
    half = k // 2

    for i in range(n):
        for step in range(1, half + 1):
            j = (i + step) % n
            if i != j:
                edges.add(_normalize_edge(i, j))

    if k % 2 == 1:
        if n % 2 == 0:
            for i in range(n // 2):
                edges.add(_normalize_edge(i, i + n // 2))
        else:
            # odd k, odd n: node (n-1)/2 receives two chords
            half = n // 2
            for i in range(half + 1):
                edges.add(_normalize_edge(i, (i + half) % n))

    return Graph(n, edges)


def generate_ring_clique(d: int, ring_size: int) -> Graph:
    """
    Build a network of d rings joined by a clique of one node per ring.

    Ring r holds nodes r*ring_size .. (r+1)*ring_size - 1, each adjacent to its
    two ring neighbours; the first node of every ring joins a d-clique.
    """
    if d < 1 or ring_size < 3:
        raise GraphParameterError(
            f"Ring-clique network needs d >= 1 and ring_size >= 3, got d={d}, ring_size={ring_size}"
        )

    edges: Set[Edge] = set()
    for r in range(d):
        base = r * ring_size
        for j in range(ring_size):
            edges.add(_normalize_edge(base + j, base + (j + 1) % ring_size))

    hubs = [r * ring_size for r in range(d)]
    for a in range(d):
        for b in range(a + 1, d):
            edges.add(_normalize_edge(hubs[a], hubs[b]))

    return Graph(d * ring_size, edges)


def _split_flow_network(graph: Graph) -> nx.DiGraph:
    """Vertex-capacitated flow network: v -> (v_in, v_out) with capacity 1."""
    flow = nx.DiGraph()
    for v in graph.nodes():
        flow.add_edge(("in", v), ("out", v), capacity=1)
    for u, v in graph.edges:
        # no capacity attribute means infinite capacity for networkx
        flow.add_edge(("out", u), ("in", v))
        flow.add_edge(("out", v), ("in", u))
    return flow


def local_vertex_connectivity(graph: Graph, source: int, sink: int,
                              flow: Optional[nx.DiGraph] = None) -> int:
    """Maximum number of internally vertex-disjoint source-sink paths (non-adjacent pair)."""
    if flow is None:
        flow = _split_flow_network(graph)
    return int(nx.maximum_flow_value(flow, ("out", source), ("in", sink)))


def vertex_connectivity(graph: Graph) -> int:
    """
    Minimum number of vertices whose removal disconnects the graph.

    Computed exactly from vertex-capacitated max-flow over non-adjacent pairs
    (Menger). Only sources among the first kappa+1 nodes need checking: some
    node among them lies outside any minimum separator. Complete graphs return
    n-1, disconnected graphs 0.
    """
    n = graph.node_count
    if n < 2:
        return 0
    if not is_connected(graph):
        return 0

    best = n - 1
    flow = _split_flow_network(graph)
    seen: Set[Edge] = set()

    for source in range(n):
        if source > best:
            break
        for sink in range(n):
            if sink == source or graph.has_edge(source, sink):
                continue
            pair = _normalize_edge(source, sink)
            if pair in seen:
                continue
            seen.add(pair)
            best = min(best, local_vertex_connectivity(graph, source, sink, flow))

    return best


def is_connected(graph: Graph) -> bool:
    return nx.is_connected(graph.to_networkx())


def diameter(graph: Graph) -> Union[int, float]:
    """Largest BFS eccentricity, or INFINITE_DIAMETER for disconnected graphs."""
    g = graph.to_networkx()
    if graph.node_count == 1:
        return 0
    if not nx.is_connected(g):
        return INFINITE_DIAMETER
    return max(
        max(lengths.values())
        for _, lengths in nx.all_pairs_shortest_path_length(g)
    )


def graph_stats(graph: Graph) -> GraphStats:
    """Compute exact n, m, max degree, diameter and vertex connectivity."""
    return GraphStats(
        n=graph.node_count,
        m=len(graph.edges),
        max_degree=graph.max_degree(),
        diameter=diameter(graph),
        vertex_connectivity=vertex_connectivity(graph),
    )
