"""Centralized brute-force checkers for the combinatorial claims a run makes."""

import logging
import math
from collections import deque
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, FrozenSet, Iterable, List, Optional, Sequence, Set, Tuple

import networkx as nx
from networkx.utils import UnionFind

from .components import ClassAssignment
from .fcds_protocol import FcdsPacking, MlTrajectory, RunResult
from .helper_graph import ConnectorPath, HelperEdge, HelperGraph, HelperGraphInvariantError, PathKind
from .virtual_graph import VirtualGraph, VirtualNodeId

logger = logging.getLogger(__name__)

EXACT_MATCHING_CAP = 40
MAX_DISJOINT_PATHS_CAP = 20000

LEVEL_STRUCTURAL = "structural"
LEVEL_FULL = "full"
VERIFY_LEVELS = (LEVEL_STRUCTURAL, LEVEL_FULL)


class VerificationError(Exception):
    """Raised when an oracle is handed ill-formed input or two oracles disagree."""
    pass


def _class_members(assignment: ClassAssignment, class_id: int,
                   max_layer: Optional[int] = None) -> List[VirtualNodeId]:
    return [
        node for node, c in assignment.items()
        if c == class_id and (max_layer is None or node.layer <= max_layer)
    ]


def check_domination(vg: VirtualGraph, assignment: ClassAssignment, class_id: int) -> bool:
    """True iff every real node has a class copy in its closed neighbourhood."""
    holders = {node.real for node in _class_members(assignment, class_id)}
    return all(holders & vg.base.closed_neighborhood(v) for v in vg.base.nodes())


def oracle_components(vg: VirtualGraph, assignment: ClassAssignment, class_id: int,
                      max_layer: Optional[int] = None) -> List[FrozenSet[VirtualNodeId]]:
    """
    Connected components of the class copies on layers 1..max_layer, by BFS.

    Copies of one real node are adjacent, so the search walks over real
    nodes holding a class copy. Sorted by minimum member.
    """
    by_real: Dict[int, List[VirtualNodeId]] = {}
    for node in _class_members(assignment, class_id, max_layer):
        by_real.setdefault(node.real, []).append(node)

    seen: Set[int] = set()
    components: List[FrozenSet[VirtualNodeId]] = []

    for start in sorted(by_real):
        if start in seen:
            continue
        seen.add(start)
        queue = deque([start])
        reals = []
        while queue:
            real = queue.popleft()
            reals.append(real)
            for neighbor in sorted(vg.base.neighbors(real)):
                if neighbor in by_real and neighbor not in seen:
                    seen.add(neighbor)
                    queue.append(neighbor)
        components.append(frozenset(node for real in reals for node in by_real[real]))

    return sorted(components, key=min)


def union_find_component_count(vg: VirtualGraph, assignment: ClassAssignment, class_id: int,
                               max_layer: Optional[int] = None) -> int:
    """Component count from pairwise derived adjacency and union-find."""
    members = sorted(_class_members(assignment, class_id, max_layer))
    if not members:
        return 0

    uf = UnionFind(members)
    for i, a in enumerate(members):
        for b in members[i + 1:]:
            if vg.is_adjacent(a, b):
                uf.union(a, b)
    return len({uf[node] for node in members})


@dataclass(frozen=True)
class ConnectivityCheck:
    """Connectivity verdict of one class; reason is 'ok', 'empty' or 'disconnected'."""
    connected: bool
    reason: str
    components: int

    def __bool__(self) -> bool:
        return self.connected


def check_class_connected(vg: VirtualGraph, assignment: ClassAssignment,
                          class_id: int) -> ConnectivityCheck:
    """
    BFS connectivity of all class copies, cross-checked by union-find.

    Raises:
        VerificationError: the two component counts differ.
    """
    count = len(oracle_components(vg, assignment, class_id))
    cross = union_find_component_count(vg, assignment, class_id)
    if count != cross:
        raise VerificationError(
            f"Class {class_id}: BFS found {count} components, union-find {cross}"
        )

    if count == 0:
        return ConnectivityCheck(False, "empty", 0)
    if count > 1:
        return ConnectivityCheck(False, "disconnected", count)
    return ConnectivityCheck(True, "ok", 1)


def enumerate_class_connector_paths(vg: VirtualGraph, assignment: ClassAssignment, layer: int,
                                    class_id: int) -> Dict[VirtualNodeId, List[ConnectorPath]]:
    """
    Connector paths of every class component formed by the copies below an
    upper layer, keyed by component id.

    For every internal node tuple and target component one path is listed,
    with the smallest possible endpoints.
    """
    if not vg.is_upper(layer):
        raise ValueError(f"Connector paths run through upper layers only, got layer {layer}")

    components = oracle_components(vg, assignment, class_id, max_layer=layer - 1)
    ids = [min(c) for c in components]
    component_of_real: Dict[int, int] = {}
    for index, component in enumerate(components):
        for node in component:
            component_of_real[node.real] = index

    def near(real: int) -> Set[int]:
        return {
            component_of_real[u]
            for u in vg.base.closed_neighborhood(real)
            if u in component_of_real
        }

    def endpoint(index: int, real: int) -> VirtualNodeId:
        closed = vg.base.closed_neighborhood(real)
        return min(node for node in components[index] if node.real in closed)

    paths: Dict[VirtualNodeId, List[ConnectorPath]] = {cid: [] for cid in ids}
    near_cache = {real: near(real) for real in vg.base.nodes()}

    for x in vg.base.nodes():
        around = sorted(near_cache[x])
        if len(around) < 2:
            continue
        middle = vg.type1(x, layer)
        for c in around:
            for other in around:
                if other == c:
                    continue
                paths[ids[c]].append(ConnectorPath(
                    kind=PathKind.SHORT,
                    source=endpoint(c, x),
                    internals=(middle,),
                    target=endpoint(other, x),
                    component=ids[c],
                    target_component=ids[other],
                ))

    for y in vg.base.nodes():
        around = near_cache[y]
        if len(around) != 1 or y in component_of_real:
            continue
        (c,) = around
        v = vg.type2(y, layer)
        for x in sorted(vg.base.neighbors(y)):
            beyond = near_cache[x]
            if c in beyond or not beyond:
                continue
            w = vg.type1(x, layer)
            for other in sorted(beyond):
                paths[ids[c]].append(ConnectorPath(
                    kind=PathKind.LONG,
                    source=endpoint(c, y),
                    internals=(v, w),
                    target=endpoint(other, x),
                    component=ids[c],
                    target_component=ids[other],
                ))

    return paths


def enumerate_connector_paths(vg: VirtualGraph, assignment: ClassAssignment, layer: int,
                              component: VirtualNodeId) -> List[ConnectorPath]:
    """Connector paths of the component with the given id."""
    class_id = assignment.class_of(component)
    if class_id is None:
        raise VerificationError(f"Component id {component!r} has no class")
    paths = enumerate_class_connector_paths(vg, assignment, layer, class_id)
    if component not in paths:
        raise VerificationError(f"{component!r} does not name a class {class_id} component below layer {layer}")
    return paths[component]


def max_disjoint_connector_paths(paths: Sequence[ConnectorPath],
                                 cap: int = MAX_DISJOINT_PATHS_CAP) -> Optional[int]:
    """
    Largest set of paths with pairwise disjoint internal nodes, or None
    when more than cap paths are given.

    Every path uses at most one type-2 and one type-1 internal node, so
    unit-capacity max flow source -> type-2 -> type-1 -> sink is exact;
    short paths enter at their type-1 node.
    """
    if len(paths) > cap:
        return None
    if not paths:
        return 0

    flow = nx.DiGraph()
    for path in paths:
        if path.kind == PathKind.SHORT:
            (w,) = path.internals
            flow.add_edge("source", ("entry", w), capacity=1)
            flow.add_edge(("entry", w), ("in", w), capacity=1)
        else:
            v, w = path.internals
            flow.add_edge("source", ("entry", v), capacity=1)
            flow.add_edge(("entry", v), ("in", w), capacity=1)
        flow.add_edge(("in", w), "sink", capacity=1)

    return int(nx.maximum_flow_value(flow, "source", "sink"))


@dataclass(frozen=True)
class MatchingCheck:
    """maximal covers validity too; ratio_ok is None when the exhaustive cap was exceeded."""
    maximal: bool
    ratio_ok: Optional[bool]
    size: int
    maximum: Optional[int]


def check_matching(h: HelperGraph, matching: Iterable[HelperEdge],
                   exact_cap: int = EXACT_MATCHING_CAP) -> MatchingCheck:
    """
    Check that a matching of h is valid and maximal, and that it is at least
    half a maximum matching when h has at most exact_cap nodes.

    Raises:
        VerificationError: the matching holds an edge that is not in h.
    """
    edges = set(h.edges)
    chosen = list(matching)
    for edge in chosen:
        if edge not in edges:
            raise VerificationError(f"Matched edge {edge!r} is not an edge of H_{h.class_id}")

    covered: Set = set()
    valid = True
    for edge in chosen:
        for endpoint in edge.endpoints():
            if endpoint in covered:
                valid = False
            covered.add(endpoint)

    maximal = valid and all(
        any(endpoint in covered for endpoint in edge.endpoints()) for edge in h.edges
    )

    if h.node_count > exact_cap:
        return MatchingCheck(maximal=maximal, ratio_ok=None, size=len(chosen), maximum=None)

    g = nx.Graph()
    top = h.type2_nodes()
    g.add_nodes_from(top)
    g.add_nodes_from(h.type1_nodes())
    g.add_edges_from(edge.endpoints() for edge in h.edges)
    maximum = len(nx.bipartite.hopcroft_karp_matching(g, top_nodes=top)) // 2

    ratio_ok = valid and len(chosen) >= math.ceil(maximum / 2)
    return MatchingCheck(maximal=maximal, ratio_ok=ratio_ok, size=len(chosen), maximum=maximum)


def long_path_pairs(paths: Iterable[ConnectorPath]) -> Set[Tuple[VirtualNodeId, VirtualNodeId]]:
    return {path.helper_pair for path in paths if path.kind == PathKind.LONG}


def helper_mismatches(h: HelperGraph,
                      paths: Dict[VirtualNodeId, List[ConnectorPath]]) -> List[str]:
    """Differences between H_i[C] edge sets and the long connector path internals, per component."""
    problems = []
    for cid in sorted(set(paths) | set(h.components())):
        expected = long_path_pairs(paths.get(cid, []))
        built = {(e.type2, e.type1) for e in h.component_edges(cid)}
        for pair in sorted(built - expected):
            problems.append(f"layer {h.layer} class {h.class_id} {cid!r}: edge {pair} has no long path")
        for pair in sorted(expected - built):
            problems.append(f"layer {h.layer} class {h.class_id} {cid!r}: long path {pair} has no edge")
    return problems


def matched_paths_disjoint(matching: Iterable[HelperEdge]) -> bool:
    """Matched edges of one component use pairwise disjoint internal copies."""
    used: Dict[VirtualNodeId, Set[VirtualNodeId]] = {}
    for edge in matching:
        internals = used.setdefault(edge.component, set())
        if edge.type2 in internals or edge.type1 in internals:
            return False
        internals.update((edge.type2, edge.type1))
    return True


@dataclass(frozen=True)
class PackingCheck:
    valid: bool
    valid_cds_count: int
    packing_size: Fraction
    problems: Tuple[str, ...] = ()

    def __bool__(self) -> bool:
        return self.valid


def verify_packing(packing: FcdsPacking, vg: VirtualGraph,
                   assignment: ClassAssignment) -> PackingCheck:
    """
    Exact check that every node's weights sum to 1 over denominator 3L and
    match its copy counts; counts the classes that are CDSs of the virtual graph.
    """
    problems: List[str] = []
    denominator = 3 * vg.L

    if packing.node_count != vg.base.node_count:
        problems.append(f"packing covers {packing.node_count} nodes, graph has {vg.base.node_count}")

    for real in range(min(packing.node_count, vg.base.node_count)):
        expected = [0] * assignment.t
        for node in vg.copies(real):
            class_id = assignment.class_of(node)
            if class_id is not None:
                expected[class_id - 1] += 1

        total = 0
        for class_id in range(1, assignment.t + 1):
            numerator, denom = packing.weight_pair(real, class_id)
            if denom != denominator:
                problems.append(f"node {real} class {class_id}: denominator {denom}, expected {denominator}")
            if numerator != expected[class_id - 1]:
                problems.append(
                    f"node {real} class {class_id}: weight {numerator}/{denom} "
                    f"but {expected[class_id - 1]} copies"
                )
            total += numerator
        if total != denominator:
            problems.append(f"node {real}: weights sum to {total}/{denominator}")

    valid_count = sum(
        1 for class_id in range(1, assignment.t + 1)
        if check_domination(vg, assignment, class_id) and check_class_connected(vg, assignment, class_id)
    )

    return PackingCheck(
        valid=not problems,
        valid_cds_count=valid_count,
        packing_size=Fraction(valid_count, denominator),
        problems=tuple(problems),
    )


def ml_trajectory(vg: VirtualGraph, assignment: ClassAssignment) -> MlTrajectory:
    """Recount M_l for l = L..2L from the final assignment."""
    layers = list(range(vg.L, vg.top_layer + 1))
    counts = {
        class_id: [len(oracle_components(vg, assignment, class_id, max_layer=l)) for l in layers]
        for class_id in range(1, assignment.t + 1)
    }
    return MlTrajectory(layers=layers, counts=counts)


@dataclass
class ClassVerdict:
    dominating: bool
    connected: bool
    reason: str
    components: int


@dataclass
class ComponentPaths:
    """Connector-path classification of one component on one upper layer."""
    layer: int
    class_id: int
    component: VirtualNodeId
    short_paths: int
    long_paths: int
    max_disjoint_paths: Optional[int]
    max_disjoint_short_paths: Optional[int]

    def needs_long_paths(self, kappa: int) -> bool:
        """Fewer than κ/2 disjoint short paths: long paths have to close the gap."""
        return self.max_disjoint_short_paths is not None and 2 * self.max_disjoint_short_paths < kappa


@dataclass
class MatchingRow:
    layer: int
    class_id: int
    maximal: bool
    ratio_ok: Optional[bool]


@dataclass
class VerifierReport:
    level: str
    classes: Dict[int, ClassVerdict] = field(default_factory=dict)
    components: List[ComponentPaths] = field(default_factory=list)
    matching_checks: List[MatchingRow] = field(default_factory=list)
    helper_mismatches: List[str] = field(default_factory=list)
    packing_valid: bool = False
    valid_cds_count: int = 0
    packing_size: Fraction = Fraction(0)
    ml_trajectory: Dict[int, List[int]] = field(default_factory=dict)
    connectivity_shortfalls: List[str] = field(default_factory=list)
    structural_violations: List[str] = field(default_factory=list)

    @property
    def domination_all(self) -> bool:
        return all(v.dominating for v in self.classes.values())

    @property
    def ok(self) -> bool:
        return not self.structural_violations

    def as_dict(self) -> Dict[str, object]:
        return {
            "level": self.level,
            "classes": {
                str(c): {"dominating": v.dominating, "connected": v.connected,
                         "reason": v.reason, "components": v.components}
                for c, v in sorted(self.classes.items())
            },
            "components": [
                {
                    "layer": p.layer,
                    "class": p.class_id,
                    "component": list(p.component),
                    "short_path_count": p.short_paths,
                    "long_path_count": p.long_paths,
                    "max_disjoint_paths": p.max_disjoint_paths,
                }
                for p in self.components
            ],
            "matching_checks": [
                {"layer": m.layer, "class": m.class_id, "maximal": m.maximal, "ratio_ok": m.ratio_ok}
                for m in self.matching_checks
            ],
            "helper_mismatches": list(self.helper_mismatches),
            "packing_valid": self.packing_valid,
            "valid_cds_count": self.valid_cds_count,
            "packing_size": str(self.packing_size),
            "domination_all": self.domination_all,
            "ml_trajectory": {str(c): list(v) for c, v in sorted(self.ml_trajectory.items())},
            "connectivity_shortfalls": list(self.connectivity_shortfalls),
            "structural_violations": list(self.structural_violations),
        }


def verify_run(result: RunResult, level: str = LEVEL_STRUCTURAL,
               exact_matching_cap: int = EXACT_MATCHING_CAP,
               max_paths_cap: int = MAX_DISJOINT_PATHS_CAP) -> VerifierReport:
    """
    Check a finished run with centralized oracles.

    The structural level checks classes, packing, helper graph invariants,
    matching maximality, the edge load bound and the M_l recount. The full
    level adds helper graph versus connector path equivalence, path counts,
    disjoint path maxima and matching ratios.

    Raises:
        VerificationError: the run kept no artifacts or the level is unknown.
    """
    if level not in VERIFY_LEVELS:
        raise VerificationError(f"Unknown verification level {level!r}")
    if result.artifacts is None:
        raise VerificationError("Run was executed without keeping artifacts")

    vg = result.virtual_graph
    assignment = result.assignment
    artifacts = result.artifacts
    kappa = result.params.kappa
    report = VerifierReport(level=level)
    violations = report.structural_violations

    for class_id in range(1, assignment.t + 1):
        connectivity = check_class_connected(vg, assignment, class_id)
        report.classes[class_id] = ClassVerdict(
            dominating=check_domination(vg, assignment, class_id),
            connected=connectivity.connected,
            reason=connectivity.reason,
            components=connectivity.components,
        )

    packing = verify_packing(result.packing, vg, assignment)
    report.packing_valid = packing.valid
    report.valid_cds_count = packing.valid_cds_count
    report.packing_size = packing.packing_size
    violations.extend(f"packing: {p}" for p in packing.problems)

    if result.report.max_edge_messages_per_matching_round > 2:
        violations.append(
            f"congestion: {result.report.max_edge_messages_per_matching_round} messages "
            f"over one directed edge in a matching round"
        )

    recount = ml_trajectory(vg, assignment)
    report.ml_trajectory = recount.counts
    if not result.truncated and recount.counts != result.trajectory.counts:
        violations.append("trajectory: protocol component counts differ from the recount")

    lower = assignment.restricted(vg.L)
    for class_id in range(1, assignment.t + 1):
        if check_domination(vg, lower, class_id) and not recount.is_monotone(class_id):
            violations.append(f"trajectory: M_l of class {class_id} increases")

    for layer in vg.upper_layers():
        old = assignment.restricted(layer - 1)
        components = artifacts.component_maps.get(layer)

        for class_id in range(1, assignment.t + 1):
            if components is not None and not components.truncated:
                expected = {min(c): c for c in oracle_components(vg, old, class_id)}
                found = {c.id: c.members for c in components.components(class_id)}
                if expected != found:
                    violations.append(f"components: layer {layer} class {class_id} differ from BFS")

            helper = artifacts.helpers.get((layer, class_id))
            matching = artifacts.matchings.get((layer, class_id))
            if helper is None or matching is None:
                continue

            try:
                helper.check_invariants(vg)
            except HelperGraphInvariantError as e:
                violations.append(f"helper: {e}")

            exact = exact_matching_cap if level == LEVEL_FULL else -1
            check = check_matching(helper, matching.edges, exact_cap=exact)
            report.matching_checks.append(MatchingRow(layer, class_id, check.maximal, check.ratio_ok))
            if not matching.truncated and not check.maximal:
                violations.append(f"matching: layer {layer} class {class_id} is not maximal")
            if check.ratio_ok is False:
                violations.append(f"matching: layer {layer} class {class_id} below half of maximum")
            if not matched_paths_disjoint(matching.edges):
                violations.append(f"matching: layer {layer} class {class_id} paths share internals")

            if level != LEVEL_FULL:
                continue

            paths = enumerate_class_connector_paths(vg, old, layer, class_id)
            problems = helper_mismatches(helper, paths)
            report.helper_mismatches.extend(problems)
            violations.extend(f"helper: {p}" for p in problems)

            dominating = check_domination(vg, old, class_id)
            for cid, component_paths in sorted(paths.items()):
                shorts = [p for p in component_paths if p.kind == PathKind.SHORT]
                entry = ComponentPaths(
                    layer=layer,
                    class_id=class_id,
                    component=cid,
                    short_paths=len(shorts),
                    long_paths=len(component_paths) - len(shorts),
                    max_disjoint_paths=max_disjoint_connector_paths(component_paths, max_paths_cap),
                    max_disjoint_short_paths=max_disjoint_connector_paths(shorts, max_paths_cap),
                )
                report.components.append(entry)
                if (kappa is not None and dominating and len(paths) > 1
                        and entry.max_disjoint_paths is not None
                        and entry.max_disjoint_paths < kappa):
                    report.connectivity_shortfalls.append(
                        f"layer {layer} class {class_id} {cid!r}: "
                        f"{entry.max_disjoint_paths} disjoint connector paths, κ={kappa}"
                    )

    if violations:
        logger.warning("Verification found %d structural violations", len(violations))

    return report
