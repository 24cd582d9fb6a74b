"""Hypothesis strategies for random base graphs."""

from hypothesis import strategies as st

from fcds_packing.graph_core import Graph, generate_harary


@st.composite
def graphs(draw, min_nodes=1, max_nodes=8):
    """Arbitrary simple graphs, possibly disconnected."""
    n = draw(st.integers(min_nodes, max_nodes))
    pairs = [(u, v) for u in range(n) for v in range(u + 1, n)]
    if not pairs:
        return Graph(n)
    chosen = draw(st.lists(st.sampled_from(pairs), unique=True, max_size=len(pairs)))
    return Graph(n, chosen)


@st.composite
def connected_graphs(draw, min_nodes=2, max_nodes=10):
    """A random spanning tree plus random extra edges."""
    n = draw(st.integers(min_nodes, max_nodes))
    edges = set()
    for child in range(1, n):
        parent = draw(st.integers(0, child - 1))
        edges.add((parent, child))
    extra = draw(st.lists(st.tuples(st.integers(0, n - 1), st.integers(0, n - 1)), max_size=2 * n))
    edges.update((min(u, v), max(u, v)) for u, v in extra if u != v)
    return Graph(n, edges)


@st.composite
def well_connected_graphs(draw, min_nodes=8, max_nodes=24, min_connectivity=3, max_connectivity=5):
    """
    Harary graphs with relabelled nodes and extra random edges.

    Adding edges never lowers vertex connectivity, so the result is at least
    min_connectivity-connected.
    """
    n = draw(st.integers(min_nodes, max_nodes))
    k = draw(st.integers(min_connectivity, min(max_connectivity, n - 1)))
    permutation = draw(st.permutations(list(range(n))))
    base = generate_harary(n, k)

    edges = {(permutation[u], permutation[v]) for u, v in base.edges}
    extra = draw(st.lists(st.tuples(st.integers(0, n - 1), st.integers(0, n - 1)), max_size=n))
    edges.update((u, v) for u, v in extra if u != v)
    return Graph(n, edges)
