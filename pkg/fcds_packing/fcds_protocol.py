"""The distributed FCDS-packing algorithm: lower-layer classes, then connect components layer by layer."""

import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, List, Mapping, NamedTuple, Optional, Tuple

from .components import ClassAssignment, ComponentMap, identify_components
from .congest_sim import (
    CongestNetwork,
    Delivery,
    DrawPurpose,
    MessageTag,
    NodeRuntime,
    ProtocolError,
    RoundReport,
    SimMessage,
    Transition,
    draw_slot,
    seeded_rng,
)
from .graph_core import Graph, is_connected, vertex_connectivity
from .helper_graph import HelperGraph, MatchingResult, build_helper_graph, distributed_maximal_matching
from .virtual_graph import VirtualGraph

logger = logging.getLogger(__name__)

PHASES = ("component_id", "type1_announce", "helper", "matching", "final_components")


class PreconditionError(ProtocolError):
    """Raised when the protocol is started on an unusable input."""
    pass


def default_layers(node_count: int, lmul: float = 1.0) -> int:
    """L = max(1, ceil(lmul * ceil(log2 n)))."""
    return max(1, math.ceil(lmul * max(1, (node_count - 1).bit_length())))


def default_classes(kappa: int) -> int:
    return max(1, math.ceil(kappa / 2))


@dataclass(frozen=True)
class ProtocolParams:
    """Run parameters; t, L and the flood cap are fixed before the first round."""
    t: int
    L: int
    seed: int
    max_component_rounds: int
    kappa: Optional[int] = None

    def __post_init__(self) -> None:
        if self.t < 1:
            raise ValueError(f"Class count t must be at least 1, got {self.t}")
        if self.L < 1:
            raise ValueError(f"Layer count L must be at least 1, got {self.L}")
        if self.max_component_rounds < 1:
            raise ValueError(f"max_component_rounds must be at least 1, got {self.max_component_rounds}")

    @classmethod
    def for_graph(cls, graph: Graph, seed: int, t: Optional[int] = None, lmul: float = 1.0,
                  kappa: Optional[int] = None,
                  max_component_rounds: Optional[int] = None) -> "ProtocolParams":
        """
        Derive defaults from the graph: t = ceil(κ/2) with κ measured unless
        given, L = ceil(lmul * ceil(log2 n)), flood cap 3L(n+2).
        """
        if lmul <= 0:
            raise ValueError(f"Layer multiplier must be positive, got {lmul}")
        if kappa is None:
            kappa = vertex_connectivity(graph)
        layers = default_layers(graph.node_count, lmul)
        if t is None:
            t = default_classes(kappa)
        if max_component_rounds is None:
            max_component_rounds = 3 * layers * (graph.node_count + 2)
        return cls(t=t, L=layers, seed=seed, max_component_rounds=max_component_rounds, kappa=kappa)

    def as_dict(self) -> Dict[str, object]:
        return {
            "t": self.t,
            "L": self.L,
            "seed": self.seed,
            "max_component_rounds": self.max_component_rounds,
            "kappa": self.kappa,
        }


def assign_lower_layers(params: ProtocolParams, vg: VirtualGraph) -> ClassAssignment:
    """Step A: every lower copy picks a class uniformly at random, without communication."""
    assignment = ClassAssignment(params.t)
    for real in vg.base.nodes():
        for layer in range(1, vg.L + 1):
            slot = draw_slot(DrawPurpose.LOWER_CLASS, layer)
            class_id = seeded_rng(params.seed, real, 0, slot, params.t) + 1
            assignment.assign(vg.copy_at(real, layer - 1), class_id)
    return assignment


class Type1Announcement(NamedTuple):
    """Type-1 classes of one layer and, per real node, the classes its neighbours chose."""
    assignment: ClassAssignment
    heard: List[Dict[int, int]]


def assign_type1(vg: VirtualGraph, layer: int, assignment: ClassAssignment,
                 params: ProtocolParams, net: CongestNetwork) -> Type1Announcement:
    """
    Step B.2: the type-1 copies of an upper layer pick random classes and
    announce them in one round.
    """
    if not vg.is_upper(layer):
        raise ValueError(f"Type-1 copies exist on upper layers only, got layer {layer}")

    def choose(node: NodeRuntime, inbox: List[Delivery]) -> Transition:
        class_id = node.draw(draw_slot(DrawPurpose.TYPE1_CLASS, layer), params.t) + 1
        return Transition(class_id, SimMessage(MessageTag.TYPE1_CLASS, (class_id,)))

    def listen(node: NodeRuntime, inbox: List[Delivery]) -> Tuple[int, Dict[int, int]]:
        heard = {
            sender: message.fields[0]
            for sender, message in inbox
            if message.tag == MessageTag.TYPE1_CLASS
        }
        return node.state, heard

    net.set_states(lambda node: None)
    net.run_round(choose)
    net.absorb(listen)

    heard: List[Dict[int, int]] = []
    for node in net.nodes:
        class_id, neighbours = node.state
        assignment.assign(vg.type1(node.real_id, layer), class_id)
        heard.append(neighbours)

    return Type1Announcement(assignment, heard)


class Type2Selection(NamedTuple):
    assignment: ClassAssignment
    surviving_paths: Dict[int, int]
    good_paths: Dict[int, int]


def select_type2(vg: VirtualGraph, layer: int, matchings: Mapping[int, MatchingResult],
                 assignment: ClassAssignment, type1_heard: List[Dict[int, int]],
                 net: CongestNetwork) -> Type2Selection:
    """
    Step B.4: every type-2 copy of the layer picks the class of a random
    path it is matched on whose type-1 node chose that class, or a random
    class when no such path remains. Uses no communication.
    """
    matched: Dict[int, List[int]] = {}
    for class_id, matching in sorted(matchings.items()):
        for edge in matching.edges:
            if edge.type2.layer != layer:
                raise ValueError(f"Matching of class {class_id} holds an edge of layer {edge.type2.layer}")
            # discard paths whose type-1 node picked another class
            if type1_heard[edge.type2.real].get(edge.type1.real) == class_id:
                matched.setdefault(edge.type2.real, []).append(class_id)

    surviving = {class_id: 0 for class_id in range(1, assignment.t + 1)}
    good = dict(surviving)
    slot = draw_slot(DrawPurpose.TYPE2_CHOICE, layer)

    for node in net.nodes:
        options = matched.get(node.real_id, [])
        for class_id in options:
            surviving[class_id] += 1
        if options:
            class_id = options[node.draw(slot, len(options))]
            good[class_id] += 1
        else:
            class_id = node.draw(slot, assignment.t) + 1
        assignment.assign(vg.type2(node.real_id, layer), class_id)

    return Type2Selection(assignment, surviving, good)


@dataclass(frozen=True)
class FcdsPacking:
    """
    Fractional CDS packing over the real nodes.

    The weight of class i at node v is counts[v][i-1] / (3L), the share of
    v's copies that chose i.
    """
    L: int
    t: int
    counts: Tuple[Tuple[int, ...], ...]

    @property
    def denominator(self) -> int:
        return 3 * self.L

    @property
    def node_count(self) -> int:
        return len(self.counts)

    def weight_pair(self, real: int, class_id: int) -> Tuple[int, int]:
        """Weight as an unreduced (numerator, 3L) pair."""
        return self.counts[real][class_id - 1], self.denominator

    def weight(self, real: int, class_id: int) -> Fraction:
        return Fraction(*self.weight_pair(real, class_id))

    def node_total(self, real: int) -> Fraction:
        return Fraction(sum(self.counts[real]), self.denominator)

    def as_dict(self) -> Dict[str, object]:
        return {
            "denominator": self.denominator,
            "t": self.t,
            "numerators": [list(row) for row in self.counts],
        }


def extract_packing(assignment: ClassAssignment, vg: VirtualGraph) -> FcdsPacking:
    """
    Weight every class of a copy by 1/(3L) at its real node.

    Raises:
        PreconditionError: some copy has no class.
    """
    counts: List[Tuple[int, ...]] = []
    for real in vg.base.nodes():
        row = [0] * assignment.t
        for node in vg.copies(real):
            class_id = assignment.class_of(node)
            if class_id is None:
                raise PreconditionError(f"Cannot extract a packing: {node!r} has no class")
            row[class_id - 1] += 1
        counts.append(tuple(row))
    return FcdsPacking(L=vg.L, t=assignment.t, counts=tuple(counts))


@dataclass
class LayerSummary:
    """What happened on one upper layer; component counts are for the layers below it."""
    layer: int
    component_counts: Dict[int, int]
    rounds_component_id: int
    rounds_type1: int
    rounds_helper: int
    rounds_matching: int
    helper_edges: Dict[int, int] = field(default_factory=dict)
    matched_edges: Dict[int, int] = field(default_factory=dict)
    matching_rounds: Dict[int, int] = field(default_factory=dict)
    surviving_paths: Dict[int, int] = field(default_factory=dict)
    good_paths: Dict[int, int] = field(default_factory=dict)
    truncated: bool = False


@dataclass
class MlTrajectory:
    """Per class, the component count M_l among copies of layers 1..l for l = L..2L."""
    layers: List[int]
    counts: Dict[int, List[int]]

    def totals(self) -> List[int]:
        return [sum(self.counts[c][i] for c in self.counts) for i in range(len(self.layers))]

    @property
    def initial_total(self) -> int:
        return self.totals()[0]

    @property
    def final_total(self) -> int:
        return self.totals()[-1]

    def is_monotone(self, class_id: int) -> bool:
        series = self.counts[class_id]
        return all(a >= b for a, b in zip(series, series[1:]))

    def as_dict(self) -> Dict[str, object]:
        return {
            "layers": list(self.layers),
            "per_class": {str(c): list(v) for c, v in sorted(self.counts.items())},
            "total": self.totals(),
        }


@dataclass
class RunArtifacts:
    """Intermediate protocol outputs kept for the oracles."""
    component_maps: Dict[int, ComponentMap] = field(default_factory=dict)
    helpers: Dict[Tuple[int, int], HelperGraph] = field(default_factory=dict)
    matchings: Dict[Tuple[int, int], MatchingResult] = field(default_factory=dict)


@dataclass
class RunResult:
    params: ProtocolParams
    virtual_graph: VirtualGraph
    assignment: ClassAssignment
    packing: FcdsPacking
    report: RoundReport
    trajectory: MlTrajectory
    layers: List[LayerSummary]
    truncated: bool
    artifacts: Optional[RunArtifacts] = None


def _phase_delta(net: CongestNetwork, before: Dict[str, int], phase: str) -> int:
    return net.rounds_per_phase.get(phase, 0) - before.get(phase, 0)


def run_full(graph: Graph, params: ProtocolParams, keep_artifacts: bool = False) -> RunResult:
    """
    Execute Step A and then Steps B.1 to B.4 on every upper layer.

    Classes are processed one after another inside a layer, and helper
    construction plus matching run for every class. A last component
    identification over all layers measures the final M.

    Raises:
        PreconditionError: the graph has fewer than two nodes or is disconnected.
    """
    if graph.node_count < 2:
        raise PreconditionError(f"Protocol needs at least two nodes, got n={graph.node_count}")
    if not is_connected(graph):
        raise PreconditionError("Protocol needs a connected graph (κ ≥ 1)")

    vg = VirtualGraph(graph, params.L)
    net = CongestNetwork(graph, params.seed, id_space=vg.node_count)
    for phase in PHASES:
        net.rounds_per_phase.setdefault(phase, 0)

    artifacts = RunArtifacts() if keep_artifacts else None
    assignment = assign_lower_layers(params, vg)
    trajectory = MlTrajectory(layers=[], counts={c: [] for c in range(1, params.t + 1)})
    summaries: List[LayerSummary] = []
    truncated = False

    logger.debug("Step A done: %d lower copies over %d classes", len(assignment), params.t)

    for layer in vg.upper_layers():
        before = dict(net.rounds_per_phase)

        with net.phase("component_id"):
            components = identify_components(vg, layer, assignment, net, params.max_component_rounds)
        truncated |= components.truncated

        counts = components.counts()
        trajectory.layers.append(layer - 1)
        for class_id, count in counts.items():
            trajectory.counts[class_id].append(count)

        with net.phase("type1_announce"):
            announcement = assign_type1(vg, layer, assignment, params, net)

        summary = LayerSummary(
            layer=layer,
            component_counts=counts,
            rounds_component_id=0,
            rounds_type1=0,
            rounds_helper=0,
            rounds_matching=0,
            truncated=components.truncated,
        )
        matchings: Dict[int, MatchingResult] = {}

        for class_id in range(1, params.t + 1):
            with net.phase("helper"):
                helper = build_helper_graph(vg, layer, class_id, components, net)
                helper.check_invariants(vg)
            with net.phase("matching"):
                matching = distributed_maximal_matching(helper, net)

            matchings[class_id] = matching
            summary.helper_edges[class_id] = len(helper.edges)
            summary.matched_edges[class_id] = len(matching.edges)
            summary.matching_rounds[class_id] = matching.matching_rounds
            summary.truncated |= matching.truncated
            truncated |= matching.truncated

            if artifacts is not None:
                artifacts.helpers[(layer, class_id)] = helper
                artifacts.matchings[(layer, class_id)] = matching

        selection = select_type2(vg, layer, matchings, assignment, announcement.heard, net)
        summary.surviving_paths = selection.surviving_paths
        summary.good_paths = selection.good_paths
        summary.rounds_component_id = _phase_delta(net, before, "component_id")
        summary.rounds_type1 = _phase_delta(net, before, "type1_announce")
        summary.rounds_helper = _phase_delta(net, before, "helper")
        summary.rounds_matching = _phase_delta(net, before, "matching")
        summaries.append(summary)

        if artifacts is not None:
            artifacts.component_maps[layer] = components

        logger.debug("Layer %d: components %s, good paths %d, %d rounds so far",
                     layer, counts, sum(selection.good_paths.values()), net.round)

    with net.phase("final_components"):
        final = identify_components(vg, vg.top_layer + 1, assignment, net, params.max_component_rounds)
    truncated |= final.truncated
    trajectory.layers.append(vg.top_layer)
    for class_id, count in final.counts().items():
        trajectory.counts[class_id].append(count)
    if artifacts is not None:
        artifacts.component_maps[vg.top_layer + 1] = final

    packing = extract_packing(assignment, vg)

    return RunResult(
        params=params,
        virtual_graph=vg,
        assignment=assignment,
        packing=packing,
        report=net.report(summaries),
        trajectory=trajectory,
        layers=summaries,
        truncated=truncated,
        artifacts=artifacts,
    )
