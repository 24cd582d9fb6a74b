"""Class assignment state and distributed identification of same-class components."""

import logging
from dataclasses import dataclass, field
from typing import Dict, Iterator, List, NamedTuple, Optional, Set, Tuple

from .congest_sim import CongestNetwork, Delivery, MessageTag, NodeRuntime, ProtocolError, SimMessage, Transition
from .virtual_graph import VirtualGraph, VirtualNodeId

logger = logging.getLogger(__name__)

ComponentId = VirtualNodeId


class AssignmentError(ProtocolError):
    """Raised when a class assignment would be revoked or is out of range."""
    pass


class ClassAssignment:
    """Map from virtual node to class 1..t; an assignment is never revoked."""

    def __init__(self, t: int):
        if t < 1:
            raise AssignmentError(f"Class count t must be at least 1, got {t}")
        self.t = t
        self._classes: Dict[VirtualNodeId, int] = {}

    def assign(self, node: VirtualNodeId, class_id: int) -> None:
        if not 1 <= class_id <= self.t:
            raise AssignmentError(f"Class {class_id} of {node!r} outside 1..{self.t}")
        previous = self._classes.get(node)
        if previous is not None:
            raise AssignmentError(
                f"{node!r} already has class {previous}, cannot reassign to {class_id}"
            )
        self._classes[node] = class_id

    def class_of(self, node: VirtualNodeId) -> Optional[int]:
        return self._classes.get(node)

    def is_assigned(self, node: VirtualNodeId) -> bool:
        return node in self._classes

    def members(self, class_id: int) -> List[VirtualNodeId]:
        return sorted(node for node, c in self._classes.items() if c == class_id)

    def items(self) -> List[Tuple[VirtualNodeId, int]]:
        return sorted(self._classes.items())

    def restricted(self, max_layer: int) -> "ClassAssignment":
        """Copy holding only the copies on layers 1..max_layer."""
        snapshot = ClassAssignment(self.t)
        snapshot._classes = {n: c for n, c in self._classes.items() if n.layer <= max_layer}
        return snapshot

    def copy(self) -> "ClassAssignment":
        duplicate = ClassAssignment(self.t)
        duplicate._classes = dict(self._classes)
        return duplicate

    def __contains__(self, node: object) -> bool:
        return node in self._classes

    def __len__(self) -> int:
        return len(self._classes)

    def __iter__(self) -> Iterator[VirtualNodeId]:
        return iter(sorted(self._classes))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ClassAssignment):
            return NotImplemented
        return self.t == other.t and self._classes == other._classes


@dataclass(frozen=True)
class Component:
    """Connected set of same-class old copies, named by its minimum member."""
    class_id: int
    id: ComponentId
    members: frozenset

    def reals(self) -> Set[int]:
        return {node.real for node in self.members}


class _FloodState(NamedTuple):
    best: Dict[int, ComponentId]
    announced: Tuple[Optional[ComponentId], ...]
    heard: Dict[int, Dict[int, ComponentId]]


@dataclass
class ComponentMap:
    """
    Outcome of component identification for one layer.

    own[x] maps each class present among x's old copies to the component id;
    heard[x] holds, per neighbour u of x, the class -> component id pairs
    that u announced. Together they are what the new copies of x know.
    """
    layer: int
    t: int
    component_of: Dict[VirtualNodeId, ComponentId]
    component_class: Dict[ComponentId, int]
    own: List[Dict[int, ComponentId]]
    heard: List[Dict[int, Dict[int, ComponentId]]]
    rounds: int = 0
    truncated: bool = False
    _grouped: Dict[int, List[Component]] = field(default_factory=dict, repr=False, compare=False)

    def components(self, class_id: int) -> List[Component]:
        if class_id not in self._grouped:
            members: Dict[ComponentId, Set[VirtualNodeId]] = {}
            for node, cid in self.component_of.items():
                if self.component_class[cid] == class_id:
                    members.setdefault(cid, set()).add(node)
            self._grouped[class_id] = [
                Component(class_id, cid, frozenset(nodes))
                for cid, nodes in sorted(members.items())
            ]
        return self._grouped[class_id]

    def count(self, class_id: int) -> int:
        return len(self.components(class_id))

    def counts(self) -> Dict[int, int]:
        return {c: self.count(c) for c in range(1, self.t + 1)}

    def heard_components(self, real: int, class_id: int) -> Set[ComponentId]:
        """Class components announced by the real neighbours of a node."""
        return {
            classes[class_id]
            for classes in self.heard[real].values()
            if class_id in classes
        }

    def near_components(self, real: int, class_id: int) -> Set[ComponentId]:
        """Class components among the old copies of a node's closed neighbourhood."""
        near = self.heard_components(real, class_id)
        if class_id in self.own[real]:
            near.add(self.own[real][class_id])
        return near


def identify_components(vg: VirtualGraph, layer: int, assignment: ClassAssignment,
                        net: CongestNetwork, max_rounds: int) -> ComponentMap:
    """
    Flood minimum ids among same-class old copies (layers < layer).

    Real nodes speak for their copies round-robin over the 3L copy slots;
    a copy re-broadcasts (class, id) whenever its known minimum changes, and
    receivers keep ids only for classes they hold. The run ends after 3L
    consecutive quiet rounds, so every node also knows the final ids its
    neighbours announced.

    Returns:
        The component map with the rounds used and a truncation flag.
    """
    if not 2 <= layer <= vg.top_layer + 1:
        raise ValueError(f"Component identification layer {layer} out of range 2..{vg.top_layer + 1}")

    copies = vg.copies_per_node
    slot_classes: List[Tuple[Optional[int], ...]] = []

    for real in vg.base.nodes():
        classes: List[Optional[int]] = []
        for node in vg.copies(real):
            if node.layer < layer:
                class_id = assignment.class_of(node)
                if class_id is None:
                    raise AssignmentError(f"Old copy {node!r} has no class at layer {layer}")
                classes.append(class_id)
            else:
                classes.append(None)
        slot_classes.append(tuple(classes))

    def initial_state(node: NodeRuntime) -> _FloodState:
        best: Dict[int, ComponentId] = {}
        for copy, class_id in zip(vg.copies(node.real_id), slot_classes[node.real_id]):
            if class_id is not None and class_id not in best:
                best[class_id] = copy
        return _FloodState(best=best, announced=(None,) * copies, heard={})

    def flood(node: NodeRuntime, inbox: List[Delivery]) -> Transition:
        state: _FloodState = node.state
        best = state.best
        heard = state.heard
        best_copied = heard_copied = False

        for sender, message in inbox:
            if message.tag != MessageTag.COMPONENT:
                continue
            class_id, cid = message.fields

            known = heard.get(sender, {}).get(class_id)
            if known is None or cid < known:
                if not heard_copied:
                    heard = {u: dict(m) for u, m in heard.items()}
                    heard_copied = True
                heard.setdefault(sender, {})[class_id] = cid

            # ids of other classes are discarded
            current = best.get(class_id)
            if current is not None and cid < current:
                if not best_copied:
                    best = dict(best)
                    best_copied = True
                best[class_id] = cid

        slot = node.round % copies
        class_id = slot_classes[node.real_id][slot]
        announced = state.announced
        message = None

        if class_id is not None and announced[slot] != best[class_id]:
            message = SimMessage(MessageTag.COMPONENT, (class_id, best[class_id]))
            announced = announced[:slot] + (best[class_id],) + announced[slot + 1:]

        if not (best_copied or heard_copied) and announced is state.announced:
            return Transition(state, message)
        return Transition(_FloodState(best, announced, heard), message)

    net.set_states(initial_state)
    result = net.run_until_fixpoint(flood, max_rounds=max_rounds, quiet_rounds=copies)
    net.absorb(lambda node, inbox: node.state)

    component_of: Dict[VirtualNodeId, ComponentId] = {}
    component_class: Dict[ComponentId, int] = {}
    own: List[Dict[int, ComponentId]] = []
    heard: List[Dict[int, Dict[int, ComponentId]]] = []

    for node in net.nodes:
        state: _FloodState = node.state
        for copy, class_id in zip(vg.copies(node.real_id), slot_classes[node.real_id]):
            if class_id is not None:
                component_of[copy] = state.best[class_id]
        for class_id, cid in state.best.items():
            component_class[cid] = class_id
        own.append(dict(state.best))
        heard.append({u: dict(m) for u, m in state.heard.items()})

    if result.truncated:
        logger.warning("Component identification for layer %d truncated at %d rounds", layer, max_rounds)

    return ComponentMap(
        layer=layer,
        t=assignment.t,
        component_of=component_of,
        component_class=component_class,
        own=own,
        heard=heard,
        rounds=result.rounds,
        truncated=result.truncated,
    )
