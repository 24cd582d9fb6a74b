"""Helper graphs of long connector paths and the distributed maximal matching on them."""

import logging
from collections import Counter
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, FrozenSet, List, NamedTuple, Optional, Set, Tuple

from .components import ComponentId, ComponentMap
from .congest_sim import (
    CongestionError,
    CongestNetwork,
    Delivery,
    DrawPurpose,
    MessageTag,
    NodeRuntime,
    ProtocolError,
    SimMessage,
    Transition,
    draw_slot,
)
from .virtual_graph import NodeKind, VirtualGraph, VirtualNodeId

logger = logging.getLogger(__name__)

MATCHING_ROUND_FACTOR = 8
MAX_EDGE_MESSAGES = 2


class HelperGraphInvariantError(ProtocolError):
    """Raised when a helper graph is not bipartite, mixes components or repeats a type-2 copy."""
    pass


class PathKind(str, Enum):
    SHORT = "short"
    LONG = "long"


@dataclass(frozen=True)
class ConnectorPath:
    """
    Path joining component C to another component C' of the same class
    through one type-1 copy (short) or a type-2 then a type-1 copy (long)
    on the current layer.
    """
    kind: PathKind
    source: VirtualNodeId
    internals: Tuple[VirtualNodeId, ...]
    target: VirtualNodeId
    component: ComponentId
    target_component: ComponentId

    @property
    def helper_pair(self) -> Optional[Tuple[VirtualNodeId, VirtualNodeId]]:
        """(type-2, type-1) internals of a long path, None for short paths."""
        if self.kind == PathKind.LONG:
            return self.internals[0], self.internals[1]
        return None


class HelperNode(NamedTuple):
    """Copy v of the current layer standing for component C, written v_C."""
    node: VirtualNodeId
    component: ComponentId

    @property
    def side(self) -> NodeKind:
        return self.node.kind


class HelperEdge(NamedTuple):
    """Edge (v_C, w_C); the tuple order is the edge id order used for tie breaks."""
    type2: VirtualNodeId
    type1: VirtualNodeId
    component: ComponentId

    def endpoints(self) -> Tuple[HelperNode, HelperNode]:
        return HelperNode(self.type2, self.component), HelperNode(self.type1, self.component)


@dataclass
class HelperGraph:
    """
    The helper graph H_i of one class on one upper layer.

    It is the union of the graphs H_i[C] over the components C of the class;
    every edge carries the component it was built for.
    """
    class_id: int
    layer: int
    nodes: FrozenSet[HelperNode]
    edges: Tuple[HelperEdge, ...]
    rounds: int = 0

    @property
    def node_count(self) -> int:
        return len(self.nodes)

    def type2_nodes(self) -> List[HelperNode]:
        return sorted(n for n in self.nodes if n.side == NodeKind.TYPE2)

    def type1_nodes(self) -> List[HelperNode]:
        return sorted(n for n in self.nodes if n.side == NodeKind.TYPE1)

    def components(self) -> List[ComponentId]:
        return sorted({n.component for n in self.nodes})

    def component_edges(self, component: ComponentId) -> List[HelperEdge]:
        """Edge set of H_i[C]."""
        return [e for e in self.edges if e.component == component]

    def incident(self, node: HelperNode) -> List[HelperEdge]:
        return [e for e in self.edges if node in e.endpoints()]

    def check_invariants(self, vg: VirtualGraph) -> None:
        """
        Assert bipartiteness, single-component attribution and the per-node
        copy limits.

        Raises:
            HelperGraphInvariantError: on the first violated property.
        """
        type2_per_real: Counter = Counter()
        type1_per_real: Counter = Counter()

        for node in self.nodes:
            if node.node.layer != self.layer:
                raise HelperGraphInvariantError(
                    f"H_{self.class_id}: {node.node!r} is not on layer {self.layer}"
                )
            if node.side == NodeKind.TYPE2:
                type2_per_real[node.node.real] += 1
            elif node.side == NodeKind.TYPE1:
                type1_per_real[node.node.real] += 1
            else:
                raise HelperGraphInvariantError(f"H_{self.class_id}: lower copy {node.node!r}")

        for real, count in type2_per_real.items():
            if count > 1:
                raise HelperGraphInvariantError(
                    f"H_{self.class_id}: real node {real} has {count} type-2 copies"
                )
        for real, count in type1_per_real.items():
            if count > max(1, vg.base.degree(real)):
                raise HelperGraphInvariantError(
                    f"H_{self.class_id}: real node {real} has {count} type-1 copies, "
                    f"more than its degree"
                )

        if len(set(self.edges)) != len(self.edges):
            raise HelperGraphInvariantError(f"H_{self.class_id}: duplicate edge")

        for edge in self.edges:
            if edge.type2.kind != NodeKind.TYPE2 or edge.type1.kind != NodeKind.TYPE1:
                raise HelperGraphInvariantError(
                    f"H_{self.class_id}: edge {edge.type2!r}-{edge.type1!r} is not type-2 to type-1"
                )
            for endpoint in edge.endpoints():
                if endpoint not in self.nodes:
                    raise HelperGraphInvariantError(
                        f"H_{self.class_id}: edge endpoint {endpoint!r} missing from the node set"
                    )
            if edge.type2.real == edge.type1.real or not vg.is_adjacent(edge.type2, edge.type1):
                raise HelperGraphInvariantError(
                    f"H_{self.class_id}: {edge.type2!r} and {edge.type1!r} are not real neighbours"
                )


class _HelperState(NamedTuple):
    offer: Optional[ComponentId]
    near: FrozenSet[ComponentId]
    pending: Tuple[Tuple[ComponentId, int], ...] = ()
    accepted: Tuple[Tuple[ComponentId, int], ...] = ()
    partners: Tuple[int, ...] = ()
    confirmed: FrozenSet[Tuple[ComponentId, int]] = frozenset()


def build_helper_graph(vg: VirtualGraph, layer: int, class_id: int,
                       components: ComponentMap, net: CongestNetwork) -> HelperGraph:
    """
    Construct H_i for one class on an upper layer.

    A real node y offers its type-2 copy for component C when none of its
    own old copies has the class and C is the only class component among
    its neighbours' old copies. A neighbour x accepts the offer with its
    type-1 copy when x is near some class component but not near C. The
    accepts are sent round-robin, one addressed message per round, and a
    closing round lets type-2 nodes publish their degree.

    Raises:
        CongestionError: the construction took more than Δ+2 rounds.
        HelperGraphInvariantError: both sides disagree on an edge.
    """
    if not vg.is_upper(layer):
        raise ValueError(f"Helper graphs exist on upper layers only, got layer {layer}")
    if components.layer != layer:
        raise ValueError(f"Component map is for layer {components.layer}, not {layer}")

    max_degree = vg.base.max_degree()
    start = net.round

    def initial_state(node: NodeRuntime) -> _HelperState:
        near = frozenset(components.near_components(node.real_id, class_id))
        offer = None
        if class_id not in components.own[node.real_id]:
            heard = components.heard_components(node.real_id, class_id)
            if len(heard) == 1:
                offer = next(iter(heard))
        return _HelperState(offer=offer, near=near)

    def collect(node: NodeRuntime, inbox: List[Delivery]) -> _HelperState:
        state: _HelperState = node.state
        pending = list(state.pending)
        partners = list(state.partners)

        for sender, message in inbox:
            if not message.fields or message.fields[0] != class_id:
                continue
            if message.tag == MessageTag.HELPER_OFFER:
                cid = message.fields[1]
                if cid not in state.near and state.near:
                    pending.append((cid, sender))
            elif message.tag == MessageTag.HELPER_ACCEPT and message.target == node.real_id:
                if message.fields[1] != state.offer:
                    raise HelperGraphInvariantError(
                        f"Node {node.real_id} got an accept for {message.fields[1]!r} "
                        f"but offered {state.offer!r}"
                    )
                partners.append(sender)

        return state._replace(pending=tuple(sorted(pending)), partners=tuple(partners))

    def offer(node: NodeRuntime, inbox: List[Delivery]) -> Transition:
        state: _HelperState = node.state
        if state.offer is None:
            return Transition(state)
        return Transition(state, SimMessage(MessageTag.HELPER_OFFER, (class_id, state.offer)))

    def respond(node: NodeRuntime, inbox: List[Delivery]) -> Transition:
        state = collect(node, inbox)
        if not state.pending:
            return Transition(state)
        (cid, partner), rest = state.pending[0], state.pending[1:]
        state = state._replace(pending=rest, accepted=state.accepted + ((cid, partner),))
        return Transition(state, SimMessage(MessageTag.HELPER_ACCEPT, (class_id, cid), target=partner))

    def assemble(node: NodeRuntime, inbox: List[Delivery]) -> Transition:
        state = collect(node, inbox)
        if state.offer is None or not state.partners:
            return Transition(state)
        degree = SimMessage(MessageTag.HELPER_DEGREE, (class_id, state.offer, len(state.partners)))
        return Transition(state, degree)

    def confirm(node: NodeRuntime, inbox: List[Delivery]) -> _HelperState:
        state: _HelperState = node.state
        confirmed = {
            (message.fields[1], sender)
            for sender, message in inbox
            if message.tag == MessageTag.HELPER_DEGREE and message.fields[0] == class_id
        }
        return state._replace(confirmed=frozenset(confirmed))

    net.set_states(initial_state)
    offers = net.run_round(offer).messages

    if offers:
        accept_rounds = 1
        net.run_round(respond)
        while any(node.state.pending for node in net.nodes):
            accept_rounds += 1
            if accept_rounds > max_degree:
                raise CongestionError(
                    f"H_{class_id} on layer {layer}: accepts need more than Δ={max_degree} rounds"
                )
            net.run_round(respond)
        net.run_round(assemble)
    net.absorb(confirm)

    rounds = net.round - start
    if rounds > max_degree + 2:
        raise CongestionError(
            f"H_{class_id} on layer {layer}: construction took {rounds} rounds, cap Δ+2={max_degree + 2}"
        )

    nodes: Set[HelperNode] = set()
    edges: List[HelperEdge] = []

    for node in net.nodes:
        state: _HelperState = node.state
        if state.offer is not None:
            nodes.add(HelperNode(vg.type2(node.real_id, layer), state.offer))

        for cid, partner in state.accepted:
            partner_state: _HelperState = net.nodes[partner].state
            if (partner_state.offer != cid
                    or node.real_id not in partner_state.partners
                    or (cid, partner) not in state.confirmed):
                raise HelperGraphInvariantError(
                    f"H_{class_id} on layer {layer}: nodes {partner} and {node.real_id} "
                    f"disagree on the edge for component {cid!r}"
                )
            nodes.add(HelperNode(vg.type1(node.real_id, layer), cid))
            edges.append(HelperEdge(vg.type2(partner, layer), vg.type1(node.real_id, layer), cid))

    registered = sum(len(node.state.partners) for node in net.nodes)
    if registered != len(edges):
        raise HelperGraphInvariantError(
            f"H_{class_id} on layer {layer}: {registered} edges on the type-2 side, {len(edges)} on the type-1 side"
        )

    logger.debug("H_%d on layer %d: %d nodes, %d edges, %d rounds",
                 class_id, layer, len(nodes), len(edges), rounds)

    return HelperGraph(
        class_id=class_id,
        layer=layer,
        nodes=frozenset(nodes),
        edges=tuple(sorted(edges)),
        rounds=rounds,
    )


@dataclass
class MatchingResult:
    """Matched helper edges plus the cost of computing them."""
    edges: Tuple[HelperEdge, ...]
    matching_rounds: int = 0
    rounds: int = 0
    truncated: bool = False
    max_edge_load: int = 0

    def __len__(self) -> int:
        return len(self.edges)

    def partner_of(self, type2: VirtualNodeId) -> Optional[HelperEdge]:
        for edge in self.edges:
            if edge.type2 == type2:
                return edge
        return None


@dataclass
class _Type2Side:
    component: ComponentId
    partners: Tuple[int, ...]
    dead: Set[int] = field(default_factory=set)
    matched: Optional[int] = None

    def active(self) -> List[int]:
        if self.matched is not None:
            return []
        return [x for x in self.partners if x not in self.dead]


@dataclass
class _MatchState:
    type2: Optional[_Type2Side]
    type1: Dict[ComponentId, Optional[int]]
    proposals: Dict[ComponentId, Tuple[int, int]] = field(default_factory=dict)
    queue: List[Tuple[ComponentId, int]] = field(default_factory=list)


def matching_round_cap(id_space: int) -> int:
    """c_rounds * ceil(log2 N) matching rounds."""
    return MATCHING_ROUND_FACTOR * max(1, (id_space - 1).bit_length())


def distributed_maximal_matching(h: HelperGraph, net: CongestNetwork,
                                 max_matching_rounds: Optional[int] = None) -> MatchingResult:
    """
    Compute a maximal matching of h in matching rounds.

    In every matching round each unmatched type-2 node draws a label in
    [0, N^4) for each of its edges whose type-1 end is still free and
    proposes along the largest one. Every free type-1 node accepts its
    largest proposal; the accept is addressed to the winner and heard by
    all other proposers, which drop the edge. Handlers only mutate the
    state of their own real node.

    Raises:
        CongestionError: a matching round exceeded Δ+2 real rounds or sent
            more than two messages over one directed edge.
    """
    if max_matching_rounds is None:
        max_matching_rounds = matching_round_cap(net.id_space)
    if not h.edges:
        return MatchingResult(edges=())

    class_id = h.class_id
    label_bound = net.id_space ** 4
    max_degree = net.graph.max_degree()
    start = net.round

    type2_side: Dict[int, _Type2Side] = {}
    for node in h.type2_nodes():
        partners = tuple(sorted(e.type1.real for e in h.edges if e.type2 == node.node))
        type2_side[node.node.real] = _Type2Side(node.component, partners)
    type1_side: Dict[int, Dict[ComponentId, Optional[int]]] = {}
    for node in h.type1_nodes():
        type1_side.setdefault(node.node.real, {})[node.component] = None

    net.set_states(lambda node: _MatchState(
        type2=type2_side.get(node.real_id),
        type1=dict(type1_side.get(node.real_id, {})),
    ))

    def hear(node: NodeRuntime, inbox: List[Delivery]) -> _MatchState:
        state: _MatchState = node.state
        side = state.type2

        for sender, message in inbox:
            if not message.fields or message.fields[0] != class_id:
                continue
            if message.tag == MessageTag.PROPOSE and message.target == node.real_id:
                cid, label = message.fields[1], message.fields[2]
                if state.type1.get(cid, -1) is not None:
                    continue
                best = state.proposals.get(cid)
                # larger label wins, ties go to the smaller edge id
                if best is None or label > best[0] or (label == best[0] and sender < best[1]):
                    state.proposals[cid] = (label, sender)
            elif message.tag == MessageTag.ACCEPT and side is not None and side.matched is None:
                if message.fields[1] != side.component or sender not in side.partners:
                    continue
                if message.target == node.real_id:
                    side.matched = sender
                else:
                    side.dead.add(sender)
        return state

    def propose(node: NodeRuntime, inbox: List[Delivery]) -> Transition:
        state = hear(node, inbox)
        side = state.type2
        if side is None or not side.active():
            return Transition(state)

        best: Optional[Tuple[int, int]] = None
        for index, x in enumerate(side.partners):
            if x in side.dead:
                continue
            label = node.draw(draw_slot(DrawPurpose.EDGE_LABEL, index), label_bound)
            if best is None or label > best[0]:
                best = (label, x)

        label, x = best
        return Transition(state, SimMessage(MessageTag.PROPOSE, (class_id, side.component, label), target=x))

    def accept(node: NodeRuntime, inbox: List[Delivery]) -> Transition:
        state = hear(node, inbox)
        for cid, (label, y) in sorted(state.proposals.items()):
            state.type1[cid] = y
            state.queue.append((cid, y))
        state.proposals.clear()

        if not state.queue:
            return Transition(state)
        cid, y = state.queue.pop(0)
        return Transition(state, SimMessage(MessageTag.ACCEPT, (class_id, cid), target=y))

    def settle(node: NodeRuntime, inbox: List[Delivery]) -> Transition:
        return Transition(hear(node, inbox))

    def unfinished() -> bool:
        return any(node.state.type2 is not None and node.state.type2.active() for node in net.nodes)

    matching_rounds = 0
    max_load = 0
    truncated = False

    while unfinished():
        if matching_rounds >= max_matching_rounds:
            truncated = True
            logger.warning("Matching of H_%d on layer %d truncated after %d matching rounds",
                           class_id, h.layer, matching_rounds)
            break
        matching_rounds += 1
        round_start = net.round

        with net.edge_window() as window:
            net.run_round(propose)
            net.run_round(accept)
            while any(node.state.queue for node in net.nodes):
                net.run_round(accept)
            net.run_round(settle)

        used = net.round - round_start
        if used > max_degree + 2:
            raise CongestionError(
                f"Matching round {matching_rounds} of H_{class_id} took {used} rounds, cap Δ+2={max_degree + 2}"
            )
        if window.max_load > MAX_EDGE_MESSAGES:
            raise CongestionError(
                f"Matching round {matching_rounds} of H_{class_id} sent {window.max_load} messages "
                f"over one directed edge"
            )
        max_load = max(max_load, window.max_load)

    matched: List[HelperEdge] = []
    for node in net.nodes:
        state: _MatchState = node.state
        for cid, y in state.type1.items():
            if y is None:
                continue
            if type2_side[y].matched != node.real_id:
                raise ProtocolError(
                    f"Matching of H_{class_id}: node {node.real_id} accepted {y} but {y} did not register it"
                )
            matched.append(HelperEdge(VirtualNodeId(y, h.layer, NodeKind.TYPE2),
                                      VirtualNodeId(node.real_id, h.layer, NodeKind.TYPE1), cid))

    return MatchingResult(
        edges=tuple(sorted(matched)),
        matching_rounds=matching_rounds,
        rounds=net.round - start,
        truncated=truncated,
        max_edge_load=max_load,
    )
