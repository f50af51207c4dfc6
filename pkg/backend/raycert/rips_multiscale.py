"""
Rips graphs D(alpha) on a window, their components across scales, and the
finite-component criterion.

A component is CertifiedFinite only when the model shows that nothing outside
it lies within alpha (checked against the full model, never just the window),
and CertifiedInfinite only through a model infinitude rule.
"""

import asyncio
import logging
from dataclasses import dataclass, field
from enum import Enum
from functools import cached_property
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import networkx as nx

from .exceptions import ContractViolation, ModelError
from .lengths import ZERO, Length, length_out
from .schemas import CertificateSchema, ScaleWitnessSchema, VerdictSchema
from .space_models import (
    PointModel,
    Window,
    close_pairs,
    critical_scales,
    enumerate_window,
    isolation_margin,
)

logger = logging.getLogger(__name__)


class UnionFind:
    """Disjoint sets over 0..size-1 with path compression and union by rank"""

    def __init__(self, size: int) -> None:
        self.parents = list(range(size))
        self.ranks = [0] * size
        self.num_components = size

    def find(self, elem: int) -> int:
        root = elem
        while root != self.parents[root]:
            root = self.parents[root]
        # Point the whole path at the root
        while elem != root:
            self.parents[elem], elem = root, self.parents[elem]
        return root

    def union(self, a: int, b: int) -> bool:
        """Merge the sets of a and b; False when they were already joined"""
        ra, rb = self.find(a), self.find(b)
        if ra == rb:
            return False
        if self.ranks[ra] < self.ranks[rb]:
            ra, rb = rb, ra
        self.parents[rb] = ra
        if self.ranks[ra] == self.ranks[rb]:
            self.ranks[ra] += 1
        self.num_components -= 1
        return True

    def groups(self) -> List[List[int]]:
        """Sets as sorted member lists, ordered by their smallest member"""
        grouped: Dict[int, List[int]] = {}
        for elem in range(len(self.parents)):
            grouped.setdefault(self.find(elem), []).append(elem)
        return sorted(grouped.values(), key=lambda members: members[0])


@dataclass(frozen=True)
class ScaleGraph:
    alpha: Length
    labels: Tuple[str, ...]
    edges: Tuple[Tuple[str, str], ...]
    components: Tuple[Tuple[str, ...], ...]
    degree_max: int

    @classmethod
    def from_edges(
        cls,
        labels: Sequence[str],
        edges: Iterable[Tuple[str, str]],
        alpha: Length = ZERO,
    ) -> "ScaleGraph":
        """Graph on labels (in the given order) with components from union-find"""
        index = {label: i for i, label in enumerate(labels)}
        if len(index) != len(labels):
            raise ContractViolation("Vertex labels must be distinct")
        pairs = []
        for a, b in edges:
            i, j = index[a], index[b]
            if i == j:
                raise ContractViolation(f"Self-loop at {a}")
            pairs.append((min(i, j), max(i, j)))
        pairs = sorted(set(pairs))

        forest = UnionFind(len(labels))
        degrees = [0] * len(labels)
        for i, j in pairs:
            forest.union(i, j)
            degrees[i] += 1
            degrees[j] += 1
        return cls(
            alpha=alpha,
            labels=tuple(labels),
            edges=tuple((labels[i], labels[j]) for i, j in pairs),
            components=tuple(tuple(labels[i] for i in group) for group in forest.groups()),
            degree_max=max(degrees, default=0),
        )

    @cached_property
    def component_index(self) -> Dict[str, int]:
        return {label: c for c, members in enumerate(self.components) for label in members}

    def to_networkx(self) -> nx.Graph:
        graph = nx.Graph()
        graph.add_nodes_from(self.labels)
        graph.add_edges_from(self.edges)
        return graph


def build_rips(window: Window, alpha: Length, model: PointModel) -> ScaleGraph:
    """
    Build D(alpha) on the window: an edge joins x != y whenever d(x, y) <= alpha

    Args:
        window: Enumerated window of the model
        alpha: Positive scale, compared exactly against distances
        model: Supplies the metric

    Returns:
        ScaleGraph with components computed by union-find
    """
    if alpha <= ZERO:
        raise ContractViolation("Rips scales must be positive")
    labels = window.labels
    pairs = sorted((i, j) for _, i, j in close_pairs(model, window, alpha))
    graph = ScaleGraph.from_edges(labels, ((labels[i], labels[j]) for i, j in pairs), alpha)
    logger.debug(
        "D(%s): %d vertices, %d edges, %d components",
        alpha,
        len(labels),
        len(graph.edges),
        len(graph.components),
    )
    return graph


class Status(str, Enum):
    CERTIFIED_FINITE = "certified_finite"
    CERTIFIED_INFINITE = "certified_infinite"
    UNKNOWN = "unknown"


@dataclass(frozen=True)
class ComponentCertificate:
    component_id: int
    alpha: Length
    members: Tuple[str, ...]
    status: Status
    # None with a finite status: nothing else exists in the model
    margin: Optional[Length] = None
    margin_exact: bool = False
    rule: Optional[str] = None

    def to_schema(self) -> CertificateSchema:
        margin: Optional[float | str]
        if self.margin is None:
            margin = "inf" if self.status is Status.CERTIFIED_FINITE else None
        else:
            margin = length_out(self.margin)
        return CertificateSchema(
            component_id=self.component_id,
            alpha=float(self.alpha),
            members=list(self.members),
            status=self.status.value,
            margin=margin,
            margin_exact=self.margin_exact,
            rule=self.rule,
        )


def certify_members(
    model: PointModel, component_id: int, members: Sequence[str], window: Window, alpha: Length
) -> ComponentCertificate:
    points = [window.point(label) for label in members]
    rule = model.infinitude_rule(points, alpha)
    if rule is not None:
        return ComponentCertificate(component_id, alpha, tuple(members), Status.CERTIFIED_INFINITE, rule=rule)

    horizon = model.margin_horizon(points, alpha)
    margin, exact = isolation_margin(model, points, horizon)
    if margin is None or margin > alpha:
        return ComponentCertificate(
            component_id,
            alpha,
            tuple(members),
            Status.CERTIFIED_FINITE,
            margin=margin,
            margin_exact=exact,
            rule="isolated" if margin is None else f"isolation margin {margin} > alpha",
        )
    # Something outside the window is within alpha: the window is too small here
    return ComponentCertificate(
        component_id, alpha, tuple(members), Status.UNKNOWN, margin=margin, margin_exact=exact
    )


def classify_components(model: PointModel, graph: ScaleGraph, window: Window) -> List[ComponentCertificate]:
    """Certify every component of the graph against the full model"""
    if graph.labels != window.labels:
        raise ContractViolation("Graph was not built from this window")
    return [
        certify_members(model, cid, members, window, graph.alpha)
        for cid, members in enumerate(graph.components)
    ]


def finite_witnesses(model: PointModel, alpha: Length) -> List[ComponentCertificate]:
    """CertifiedFinite components found in the model's own witness region at alpha"""
    region = model.witness_region(alpha)
    if region is None:
        return []
    window = enumerate_window(model, region)
    if not len(window):
        return []
    graph = build_rips(window, alpha, model)
    return [
        cert
        for cert in classify_components(model, graph, window)
        if cert.status is Status.CERTIFIED_FINITE
    ]


def zone_certificates(model: PointModel, alpha: Length) -> List[ComponentCertificate]:
    """
    Components of D(alpha) around the points the infinitude rule does not
    cover, which may lie outside any window. The zone is grown by alpha, so
    a component confined to it is seen whole.
    """
    zone = model.uncertified_zone(alpha)
    if zone is None:
        return []
    window = enumerate_window(model, zone)
    if not len(window):
        return []
    return classify_components(model, build_rips(window, alpha, model), window)


ScaleResult = Tuple[ScaleGraph, List[ComponentCertificate]]


def analyze_scale(model: PointModel, window: Window, alpha: Length) -> ScaleResult:
    graph = build_rips(window, alpha, model)
    return graph, classify_components(model, graph, window)


async def analyze_scales_async(
    model: PointModel, window: Window, scales: Sequence[Length], threads: int = 1
) -> List[ScaleResult]:
    """
    Analyze every scale in worker threads, at most `threads` at a time

    Results come back in scale order whatever the schedule.
    """
    semaphore = asyncio.Semaphore(threads)

    async def run(alpha: Length) -> ScaleResult:
        async with semaphore:
            return await asyncio.to_thread(analyze_scale, model, window, alpha)

    results = await asyncio.gather(*(run(alpha) for alpha in scales), return_exceptions=True)

    merged: List[ScaleResult] = []
    for alpha, result in zip(scales, results):
        if isinstance(result, BaseException):
            logger.error("Analysis at scale %s failed: %s", alpha, result)
            raise result
        merged.append(result)
    return merged


def analyze_scales(
    model: PointModel, window: Window, scales: Sequence[Length], threads: int = 1
) -> List[ScaleResult]:
    if threads <= 1 or len(scales) <= 1:
        return [analyze_scale(model, window, alpha) for alpha in scales]
    return asyncio.run(analyze_scales_async(model, window, scales, threads))


def scan_scales(model: PointModel, window: Window, alpha_max: Length) -> List[Length]:
    """Critical scales up to alpha_max, or alpha_max alone when there are none"""
    return critical_scales(model, window, alpha_max) or [alpha_max]


@dataclass
class MergeTree:
    levels: List[ScaleGraph]
    certificates: List[List[ComponentCertificate]]
    # parents[k][c]: component of levels[k+1] containing component c of levels[k]
    parents: List[List[int]]
    persistence_rule: Optional[str] = None
    # Components near points no infinitude rule covers, which the window may miss
    beyond_window: Dict[Length, List[ComponentCertificate]] = field(default_factory=dict)

    @property
    def scales(self) -> List[Length]:
        return [level.alpha for level in self.levels]

    def monotone_violations(self) -> List[str]:
        """Parent links along which a certified status would move Infinite to Finite"""
        problems = []
        for k in range(len(self.levels) - 1):
            upper = self.certificates[k + 1]
            for c, parent in enumerate(self.parents[k]):
                child_status = self.certificates[k][c].status
                if child_status is Status.CERTIFIED_INFINITE and upper[parent].status is Status.CERTIFIED_FINITE:
                    problems.append(
                        f"component {c} at {self.levels[k].alpha} is infinite "
                        f"but its parent {parent} at {self.levels[k + 1].alpha} is finite"
                    )
        return problems


def tree_from_results(results: Sequence[ScaleResult], persistence_rule: Optional[str] = None) -> MergeTree:
    levels = [graph for graph, _ in results]
    for lower, upper in zip(levels, levels[1:]):
        if upper.alpha < lower.alpha:
            raise ContractViolation("Scales must be sorted ascending")
        if upper.labels != lower.labels:
            raise ContractViolation("Vertex set changed between scales")

    parents: List[List[int]] = []
    for k, graph in enumerate(levels):
        if k + 1 == len(levels):
            parents.append(list(range(len(graph.components))))
            continue
        above = levels[k + 1].component_index
        links = []
        for members in graph.components:
            targets = {above[label] for label in members}
            if len(targets) != 1:
                raise ContractViolation(f"Component {members[0]} splits between {graph.alpha} and the next scale")
            links.append(targets.pop())
        parents.append(links)
    return MergeTree(levels, [certs for _, certs in results], parents, persistence_rule)


def merge_tree(model: PointModel, window: Window, scales: Sequence[Length], threads: int = 1) -> MergeTree:
    """Components of D(alpha) at each scale linked to their parents at the next one"""
    if list(scales) != sorted(scales):
        raise ContractViolation("Scales must be sorted ascending")
    results = analyze_scales(model, window, scales, threads)
    tree = tree_from_results(results, model.persistence_rule())
    for alpha in tree.scales:
        uncovered = [c for c in zone_certificates(model, alpha) if c.status is not Status.CERTIFIED_INFINITE]
        if uncovered:
            tree.beyond_window[alpha] = uncovered
    return tree


class Outcome(str, Enum):
    SATISFIED = "satisfied"
    FAILS = "fails"
    INCONCLUSIVE = "inconclusive"


@dataclass
class CriterionVerdict:
    outcome: Outcome
    scales_examined: List[Length]
    alpha_star: Optional[Length] = None
    witnesses: List[Tuple[Length, List[ComponentCertificate]]] = field(default_factory=list)
    unknown_scales: List[Length] = field(default_factory=list)
    rule: Optional[str] = None

    def to_schema(self) -> VerdictSchema:
        return VerdictSchema(
            outcome=self.outcome.value,
            alpha_star=None if self.alpha_star is None else float(self.alpha_star),
            scales_examined=[float(a) for a in self.scales_examined],
            witnesses=[
                ScaleWitnessSchema(alpha=float(alpha), components=[c.to_schema() for c in certs])
                for alpha, certs in self.witnesses
            ],
            unknown_scales=[float(a) for a in self.unknown_scales],
            rule=self.rule,
        )


def verdict_from_tree(model: PointModel, tree: MergeTree) -> CriterionVerdict:
    scales = tree.scales
    unknown = [
        alpha
        for alpha, certs in zip(scales, tree.certificates)
        if any(c.status is Status.UNKNOWN for c in certs)
    ]

    for alpha, certs in zip(scales, tree.certificates):
        if certs and all(c.status is Status.CERTIFIED_INFINITE for c in certs):
            hidden = tree.beyond_window.get(alpha)
            if hidden:
                logger.info(
                    "%s: window is all infinite at alpha=%s but %s is not", model.name, alpha, hidden[0].members[0]
                )
                continue
            logger.info("%s satisfies the criterion at alpha=%s", model.name, alpha)
            return CriterionVerdict(
                Outcome.SATISFIED,
                scales,
                alpha_star=alpha,
                unknown_scales=[a for a in unknown if a < alpha],
                rule=certs[0].rule,
            )

    rule = tree.persistence_rule
    if rule is not None:
        witnesses = []
        for alpha, certs in zip(scales, tree.certificates):
            found = [c for c in certs if c.status is Status.CERTIFIED_FINITE]
            if not found:
                found = finite_witnesses(model, alpha)
            witnesses.append((alpha, found))
        logger.info("%s fails the criterion: %s", model.name, rule)
        return CriterionVerdict(Outcome.FAILS, scales, witnesses=witnesses, unknown_scales=unknown, rule=rule)

    logger.info("%s: criterion inconclusive up to %s", model.name, scales[-1] if scales else None)
    return CriterionVerdict(Outcome.INCONCLUSIVE, scales, unknown_scales=unknown)


def decide_criterion(
    model: PointModel, window: Window, alpha_max: Length, threads: int = 1
) -> CriterionVerdict:
    """
    Decide whether some alpha <= alpha_max leaves D(alpha) without finite components

    Args:
        model: The point model
        window: Window the scan is run on
        alpha_max: Largest scale examined
        threads: Worker threads for the per-scale analysis

    Returns:
        Satisfied at the least such critical scale; Fails only when the model
        proves finite components persist at every scale; Inconclusive otherwise
    """
    if alpha_max <= ZERO:
        raise ModelError("alpha_max must be positive")
    if not len(window):
        raise ContractViolation("The window holds no points")
    tree = merge_tree(model, window, scan_scales(model, window, alpha_max), threads)
    return verdict_from_tree(model, tree)
