"""Layered virtual graph with 3L copies of every real node, adjacency derived on demand."""

from enum import IntEnum
from typing import Iterable, Iterator, List, NamedTuple, Optional, Set

from .graph_core import Graph


class InvalidVirtualNodeError(Exception):
    """Raised for a virtual node id whose layer/kind combination does not exist."""
    pass


class NodeKind(IntEnum):
    """Copy kind; the integer value is the rank used in the id order."""
    LOWER = 0
    TYPE1 = 1
    TYPE2 = 2


class VirtualNodeId(NamedTuple):
    """
    Virtual copy of a real node.

    Ids compare lexicographically by (real, layer, kind), the tuple
    (id_v, l, type) used as component identifier.
    """
    real: int
    layer: int
    kind: NodeKind

    def __repr__(self) -> str:
        return f"v({self.real},{self.layer},{self.kind.name.lower()})"


def project(node: VirtualNodeId) -> int:
    """Real node a virtual copy belongs to."""
    return node.real


def project_all(nodes: Iterable[VirtualNodeId]) -> Set[int]:
    """Image of a set of virtual copies under the projection."""
    return {node.real for node in nodes}


class VirtualGraph:
    """
    The virtual graph over a base graph with L lower and L upper layers.

    Lower layers 1..L hold one copy of every real node, upper layers
    L+1..2L hold a type-1 and a type-2 copy, 3L copies per real node in
    total. A copy is adjacent to every other copy of its own real node and to
    every copy of each real neighbour.
    """

    def __init__(self, base: Graph, layers: int):
        if layers < 1:
            raise ValueError(f"Layer count L must be at least 1, got {layers}")
        self.base = base
        self.L = layers
        self._copies = [self._build_copies(real) for real in base.nodes()]

    def _build_copies(self, real: int) -> List[VirtualNodeId]:
        copies = [VirtualNodeId(real, layer, NodeKind.LOWER) for layer in range(1, self.L + 1)]
        for layer in self.upper_layers():
            copies.append(VirtualNodeId(real, layer, NodeKind.TYPE1))
            copies.append(VirtualNodeId(real, layer, NodeKind.TYPE2))
        return copies

    @property
    def copies_per_node(self) -> int:
        return 3 * self.L

    @property
    def top_layer(self) -> int:
        return 2 * self.L

    @property
    def node_count(self) -> int:
        return 3 * self.L * self.base.node_count

    def upper_layers(self) -> range:
        return range(self.L + 1, 2 * self.L + 1)

    def is_upper(self, layer: int) -> bool:
        return self.L < layer <= 2 * self.L

    def validate(self, node: VirtualNodeId) -> None:
        if not 0 <= node.real < self.base.node_count:
            raise InvalidVirtualNodeError(f"{node!r}: real node out of range")
        if not 1 <= node.layer <= 2 * self.L:
            raise InvalidVirtualNodeError(f"{node!r}: layer out of range 1..{2 * self.L}")
        if (node.kind == NodeKind.LOWER) != (node.layer <= self.L):
            raise InvalidVirtualNodeError(
                f"{node!r}: kind {node.kind.name} does not exist on layer {node.layer}"
            )

    def copies(self, real: int) -> List[VirtualNodeId]:
        """All 3L copies of a real node in slot order (which is id order)."""
        return self._copies[real]

    def slot(self, node: VirtualNodeId) -> int:
        """Position of a copy among the 3L copies of its real node."""
        if node.kind == NodeKind.LOWER:
            return node.layer - 1
        return self.L + 2 * (node.layer - self.L - 1) + (node.kind - 1)

    def copy_at(self, real: int, slot: int) -> VirtualNodeId:
        return self._copies[real][slot]

    def type1(self, real: int, layer: int) -> VirtualNodeId:
        return VirtualNodeId(real, layer, NodeKind.TYPE1)

    def type2(self, real: int, layer: int) -> VirtualNodeId:
        return VirtualNodeId(real, layer, NodeKind.TYPE2)

    def nodes(self) -> Iterator[VirtualNodeId]:
        for real in self.base.nodes():
            yield from self._copies[real]

    def is_adjacent(self, a: VirtualNodeId, b: VirtualNodeId) -> bool:
        self.validate(a)
        self.validate(b)
        if a == b:
            return False
        return a.real == b.real or self.base.has_edge(a.real, b.real)

    def neighbors(self, node: VirtualNodeId) -> Iterator[VirtualNodeId]:
        """Derived neighbourhood, in ascending id order."""
        for real in sorted(self.base.closed_neighborhood(node.real)):
            for other in self._copies[real]:
                if other != node:
                    yield other

    def virtual_degree(self, node: VirtualNodeId) -> int:
        self.validate(node)
        copies = 3 * self.L
        return (copies - 1) + copies * self.base.degree(node.real)

    def layer_nodes(self, layer: int, kind: Optional[NodeKind] = None,
                    cumulative: bool = False) -> List[VirtualNodeId]:
        """
        Copies on one layer, or on layers 1..layer when cumulative.

        Args:
            layer: Layer index in 1..2L.
            kind: Restrict to one copy kind.
            cumulative: Return the nodes of layers 1 to layer.

        Returns:
            Ids in ascending order.
        """
        if not 1 <= layer <= 2 * self.L:
            raise InvalidVirtualNodeError(f"Layer {layer} out of range 1..{2 * self.L}")

        result = []
        for real in self.base.nodes():
            for node in self._copies[real]:
                on_layer = node.layer <= layer if cumulative else node.layer == layer
                if on_layer and (kind is None or node.kind == kind):
                    result.append(node)
        return result
