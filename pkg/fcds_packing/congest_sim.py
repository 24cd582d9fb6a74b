"""Synchronous broadcast-CONGEST round simulator."""

import dataclasses
import hashlib
import logging
import struct
from collections import Counter
from contextlib import contextmanager
from dataclasses import dataclass, field
from enum import IntEnum
from typing import Any, Callable, Dict, Iterator, List, NamedTuple, Optional, Sequence, Tuple, Union

from .graph_core import Graph
from .virtual_graph import VirtualNodeId

logger = logging.getLogger(__name__)

MAX_FIELDS = 6
MESSAGE_WORDS = 8
TAG_BITS = 8

_MASK64 = (1 << 64) - 1

Field = Union[int, VirtualNodeId]


class ProtocolError(Exception):
    """Raised when a protocol breaks a rule of the communication model."""
    pass


class MessageBudgetError(ProtocolError):
    """Raised when a node emits a message above the O(log n) size budget."""
    pass


class CongestionError(ProtocolError):
    """Raised when a per-edge load or round cap is exceeded."""
    pass


class MessageTag(IntEnum):
    """Protocol phase a message belongs to."""
    COMPONENT = 1
    TYPE1_CLASS = 2
    HELPER_OFFER = 3
    HELPER_ACCEPT = 4
    HELPER_DEGREE = 5
    PROPOSE = 6
    ACCEPT = 7


class DrawPurpose(IntEnum):
    """Namespace of a random draw; one node may draw for several purposes in a round."""
    LOWER_CLASS = 1
    TYPE1_CLASS = 2
    EDGE_LABEL = 3
    TYPE2_CHOICE = 4


def draw_slot(purpose: DrawPurpose, index: int) -> int:
    """Slot for the index-th draw of a purpose, the purpose in the high 32 bits."""
    if not 0 <= index < (1 << 32):
        raise ValueError(f"Draw index {index} out of range")
    return (int(purpose) << 32) | index


def field_bits(value: Field) -> int:
    """Serialized width of one message field."""
    if isinstance(value, VirtualNodeId):
        return max(1, value.real.bit_length()) + max(1, value.layer.bit_length()) + 2
    if value < 0:
        raise ValueError(f"Message fields must be non-negative, got {value}")
    return max(1, int(value).bit_length())


def word_bits(id_space: int) -> int:
    """ceil(log2(N^4)), the width of one O(log n) word."""
    return max(1, (id_space ** 4 - 1).bit_length())


@dataclass(frozen=True)
class SimMessage:
    """
    One broadcast message.

    A message is heard by every neighbour of its sender. Setting target marks
    it as addressed to one neighbour; the target counts as a field and the
    message counts towards that directed edge's load.
    """
    tag: MessageTag
    fields: Tuple[Field, ...] = ()
    target: Optional[int] = None

    @property
    def field_count(self) -> int:
        return len(self.fields) + (0 if self.target is None else 1)

    def bit_size(self) -> int:
        bits = TAG_BITS + sum(field_bits(value) for value in self.fields)
        if self.target is not None:
            bits += field_bits(self.target)
        return bits


class Delivery(NamedTuple):
    sender: int
    message: SimMessage


class Transition(NamedTuple):
    """Result of one handler call: the node's next state and what it emits."""
    state: Any
    message: Optional[SimMessage] = None


def seeded_rng(seed: int, real_id: int, round_no: int, slot: int,
               bound: Optional[int] = None) -> Union[int, float]:
    """
    Counter-based uniform draw for (seed, node, round, slot).

    Hashes the packed tuple with BLAKE2b; the same inputs always give the
    same value. Returns a float in [0, 1) without bound, else an int in
    [0, bound).
    """
    payload = struct.pack(">QQQQ", seed & _MASK64, real_id, round_no, slot & _MASK64)
    value = int.from_bytes(hashlib.blake2b(payload, digest_size=16).digest(), "big")

    if bound is None:
        return value / (1 << 128)
    if bound < 1:
        raise ValueError(f"Draw bound must be positive, got {bound}")
    return value % bound


class NodeRuntime:
    """A real node as seen by handlers: id, neighbours, state and its random stream."""

    __slots__ = ("real_id", "neighbors", "state", "_net")

    def __init__(self, real_id: int, neighbors: Sequence[int], net: "CongestNetwork"):
        self.real_id = real_id
        self.neighbors = tuple(sorted(neighbors))
        self.state: Any = None
        self._net = net

    @property
    def round(self) -> int:
        """Index of the round currently being executed."""
        return self._net.round

    def draw(self, slot: int, bound: Optional[int] = None) -> Union[int, float]:
        return seeded_rng(self._net.seed, self.real_id, self._net.round, slot, bound)


Handler = Callable[[NodeRuntime, Sequence[Delivery]], Transition]


class RoundOutcome(NamedTuple):
    changed: bool
    messages: int

    @property
    def quiet(self) -> bool:
        return not self.changed and self.messages == 0


class FixpointResult(NamedTuple):
    rounds: int
    truncated: bool


class EdgeWindow:
    """Addressed-message counts per directed real edge over a span of rounds."""

    def __init__(self) -> None:
        self.loads: Counter = Counter()

    @property
    def max_load(self) -> int:
        return max(self.loads.values(), default=0)


@dataclass
class RoundReport:
    """Round and message bookkeeping of one simulation."""
    rounds_total: int
    rounds_per_phase: Dict[str, int]
    messages_sent: int
    max_edge_messages_per_matching_round: int
    per_layer: List[Any] = field(default_factory=list)

    def as_dict(self) -> Dict[str, object]:
        return {
            "rounds_total": self.rounds_total,
            "rounds_per_phase": dict(sorted(self.rounds_per_phase.items())),
            "messages_sent": self.messages_sent,
            "max_edge_messages_per_matching_round": self.max_edge_messages_per_matching_round,
            "per_layer": [
                dataclasses.asdict(summary) if dataclasses.is_dataclass(summary) else summary
                for summary in self.per_layer
            ],
        }


class CongestNetwork:
    """
    Simulator state: one runtime per real node, in-flight messages and counters.

    A message emitted in round r is in the inboxes of round r+1. Handlers of
    one round all see the state from the start of that round.
    """

    def __init__(self, graph: Graph, seed: int, id_space: Optional[int] = None):
        self.graph = graph
        self.seed = seed
        self.id_space = id_space if id_space is not None else graph.node_count
        self.word_bits = word_bits(self.id_space)
        self.bit_budget = MESSAGE_WORDS * self.word_bits
        self.nodes = [NodeRuntime(v, graph.neighbors(v), self) for v in graph.nodes()]
        self.round = 0
        self.messages_sent = 0
        self.rounds_per_phase: Dict[str, int] = {}
        self.max_edge_messages_per_matching_round = 0
        self._inboxes: List[List[Delivery]] = [[] for _ in graph.nodes()]
        self._phase = "idle"
        self._window: Optional[EdgeWindow] = None

    @property
    def current_phase(self) -> str:
        return self._phase

    @contextmanager
    def phase(self, name: str) -> Iterator[None]:
        """Attribute the rounds run inside the block to a named phase."""
        previous = self._phase
        self._phase = name
        self.rounds_per_phase.setdefault(name, 0)
        try:
            yield
        finally:
            self._phase = previous

    @contextmanager
    def edge_window(self) -> Iterator[EdgeWindow]:
        """Count addressed messages per directed edge inside the block."""
        window = EdgeWindow()
        outer = self._window
        self._window = window
        try:
            yield window
        finally:
            self._window = outer
            self.max_edge_messages_per_matching_round = max(
                self.max_edge_messages_per_matching_round, window.max_load
            )

    def set_states(self, factory: Callable[[NodeRuntime], Any]) -> None:
        for node in self.nodes:
            node.state = factory(node)

    def _check_message(self, node: NodeRuntime, message: SimMessage) -> None:
        if message.field_count > MAX_FIELDS:
            raise MessageBudgetError(
                f"Node {node.real_id} in phase '{self._phase}' emitted {message.field_count} fields "
                f"(limit {MAX_FIELDS})"
            )
        bits = message.bit_size()
        if bits > self.bit_budget:
            raise MessageBudgetError(
                f"Node {node.real_id} in phase '{self._phase}' emitted {bits} bits "
                f"(budget {self.bit_budget})"
            )
        if message.target is not None and message.target not in self.graph.neighbors(node.real_id):
            raise ProtocolError(
                f"Node {node.real_id} in phase '{self._phase}' addressed non-neighbour {message.target}"
            )

    def run_round(self, handler: Handler) -> RoundOutcome:
        """
        Execute one synchronous round.

        Every node's handler runs exactly once with its full inbox; emitted
        messages become next round's inboxes.

        Raises:
            MessageBudgetError: a node emitted an oversized message.
        """
        transitions: List[Transition] = []
        for node in self.nodes:
            transition = handler(node, self._inboxes[node.real_id])
            if transition.message is not None:
                self._check_message(node, transition.message)
            transitions.append(transition)

        changed = False
        emitted = 0
        inboxes: List[List[Delivery]] = [[] for _ in self.nodes]

        for node, transition in zip(self.nodes, transitions):
            if transition.state is not node.state and transition.state != node.state:
                changed = True
            node.state = transition.state

            message = transition.message
            if message is None:
                continue
            emitted += 1
            delivery = Delivery(node.real_id, message)
            for neighbor in node.neighbors:
                inboxes[neighbor].append(delivery)
            if message.target is not None and self._window is not None:
                self._window.loads[(node.real_id, message.target)] += 1

        self._inboxes = inboxes
        self.round += 1
        self.messages_sent += emitted
        self.rounds_per_phase[self._phase] = self.rounds_per_phase.get(self._phase, 0) + 1

        return RoundOutcome(changed=changed, messages=emitted)

    def absorb(self, receive: Callable[[NodeRuntime, Sequence[Delivery]], Any]) -> None:
        """
        Complete the receive half of the last round.

        Each node folds the messages delivered at the end of the last round
        into its state; the inboxes are then empty. No round is consumed and
        nothing can be sent.
        """
        for node in self.nodes:
            node.state = receive(node, self._inboxes[node.real_id])
        self._inboxes = [[] for _ in self.nodes]

    def inbox(self, real_id: int) -> Sequence[Delivery]:
        return tuple(self._inboxes[real_id])

    def run_until_fixpoint(self, handler: Handler, max_rounds: int,
                           quiet_rounds: int = 1) -> FixpointResult:
        """
        Run rounds until quiet_rounds consecutive rounds change no state and
        send no message, or until max_rounds.

        Returns:
            Rounds used and whether the cap was hit first.
        """
        if max_rounds < 1:
            raise ValueError(f"max_rounds must be at least 1, got {max_rounds}")

        quiet = 0
        for used in range(1, max_rounds + 1):
            if self.run_round(handler).quiet:
                quiet += 1
                if quiet >= quiet_rounds:
                    return FixpointResult(rounds=used, truncated=False)
            else:
                quiet = 0

        logger.warning(
            "Phase '%s' truncated after %d rounds without reaching a fixpoint",
            self._phase, max_rounds,
        )
        return FixpointResult(rounds=max_rounds, truncated=True)

    def report(self, per_layer: Optional[List[Any]] = None) -> RoundReport:
        return RoundReport(
            rounds_total=self.round,
            rounds_per_phase=dict(self.rounds_per_phase),
            messages_sent=self.messages_sent,
            max_edge_messages_per_matching_round=self.max_edge_messages_per_matching_round,
            per_layer=list(per_layer or []),
        )
