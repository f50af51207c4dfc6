"""
Ray structures: partitions of a (cloned) point set into rays, each a bijective
image of N with uniformly bounded steps.

The production path takes one BFS spanning tree per component of D(alpha),
peels rays from it that end at model exits (where a continuation rule carries
the ray out of the window for good), and turns the finite subtrees hanging off
a ray into closed clone walks spliced into it. Clones are co-located with their
originals and labelled "<original>#<k>".
"""

import heapq
import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Dict, Iterator, List, Optional, Sequence, Set, Tuple

import networkx as nx

from .exceptions import ContractViolation, ModelError, SynthesisRefused, UnknownLabel
from .lengths import ZERO, Length
from .rips_multiscale import (
    ComponentCertificate,
    Outcome,
    ScaleGraph,
    Status,
    UnionFind,
    build_rips,
    classify_components,
    decide_criterion,
)
from .schemas import (
    CheckSchema,
    CloneSchema,
    ContinuationSchema,
    RaySchema,
    ValidationReportSchema,
    WitnessSchema,
)
from .space_models import ContinuationRule, Point, PointModel, Window, natural_key

logger = logging.getLogger(__name__)

Edge = Tuple[str, str]
OrderKey = Callable[[str], tuple]

CLONE_MARK = "#"
METRIC_CONVENTION = "clones-colocated"


def original_of(label: str) -> str:
    return label.split(CLONE_MARK, 1)[0]


def _fresh_label(vertex: str, counters: Dict[str, int]) -> str:
    """The original label on a vertex's first appearance, a new clone label after"""
    used = counters.get(vertex, 0)
    counters[vertex] = used + 1
    return vertex if used == 0 else f"{vertex}{CLONE_MARK}{used}"


def _round_up(length: Length) -> Length:
    """A rational at most 1e-9 above the length, exact when it has few decimals"""
    scaled = length.upper_rational() * 10**9
    return Length.of(Fraction(math.ceil(scaled), 10**9))


@dataclass
class Ray:
    id: int
    prefix: List[str]
    continuation: Optional[ContinuationRule] = None


@dataclass
class RayStructureWitness:
    lipschitz_c: Length
    rays: List[Ray]
    clones: Dict[str, str] = field(default_factory=dict)
    metric_convention: str = METRIC_CONVENTION

    def labels(self) -> Iterator[str]:
        for ray in self.rays:
            yield from ray.prefix

    def to_schema(self) -> WitnessSchema:
        return WitnessSchema(
            lipschitz_C=float(self.lipschitz_c),
            rays=[
                RaySchema(
                    id=ray.id,
                    prefix=list(ray.prefix),
                    continuation=(
                        ContinuationSchema(
                            kind=ray.continuation.kind,  # type: ignore[arg-type]
                            anchor=ray.continuation.anchor,
                            axis=ray.continuation.axis,
                            sign=ray.continuation.sign,
                        )
                        if ray.continuation
                        else None
                    ),
                )
                for ray in self.rays
            ],
            clones=[
                CloneSchema(label=label, original=original)
                for label, original in sorted(self.clones.items(), key=lambda item: natural_key(item[0]))
            ],
            metric_convention=self.metric_convention,
        )

    @classmethod
    def from_schema(cls, schema: WitnessSchema) -> "RayStructureWitness":
        try:
            constant = Length.of(schema.lipschitz_C)
        except ModelError as exc:
            raise ContractViolation(f"Invalid Lipschitz constant: {exc}") from exc
        return cls(
            lipschitz_c=constant,
            rays=[
                Ray(
                    id=ray.id,
                    prefix=list(ray.prefix),
                    continuation=(
                        ContinuationRule(
                            ray.continuation.kind,
                            ray.continuation.anchor,
                            ray.continuation.axis,
                            ray.continuation.sign,
                        )
                        if ray.continuation
                        else None
                    ),
                )
                for ray in schema.rays
            ],
            clones={clone.label: clone.original for clone in schema.clones},
            metric_convention=schema.metric_convention,
        )


@dataclass
class ForestDecomposition:
    forests: List[List[Edge]]

    @property
    def count(self) -> int:
        return len(self.forests)


def spanning_forest(graph: ScaleGraph) -> ForestDecomposition:
    """
    Split the edge set into edge-disjoint forests

    Each edge goes to the first forest in which it closes no cycle. An edge
    landing in forest k has an endpoint already touching k-1 earlier forests,
    so the count never exceeds the maximum degree.
    """
    index = {label: i for i, label in enumerate(graph.labels)}
    finders: List[UnionFind] = []
    forests: List[List[Edge]] = []
    for a, b in graph.edges:
        i, j = index[a], index[b]
        for finder, forest in zip(finders, forests):
            if finder.union(i, j):
                forest.append((a, b))
                break
        else:
            finder = UnionFind(len(graph.labels))
            finder.union(i, j)
            finders.append(finder)
            forests.append([(a, b)])

    if len(forests) > graph.degree_max:
        raise ContractViolation(f"{len(forests)} forests exceed the maximum degree {graph.degree_max}")
    return ForestDecomposition(forests)


@dataclass
class CloneWalk:
    root: str
    walk: List[str]
    originals: List[str]
    multiplicity: Dict[str, int]
    clones: Dict[str, str]


def make_clone_walk(
    tree: nx.Graph,
    root: str,
    bound: Optional[int] = None,
    order: OrderKey = natural_key,
    counters: Optional[Dict[str, int]] = None,
) -> CloneWalk:
    """
    Closed depth-first walk of a finite tree from its root and back

    Every tree edge is used once in each direction; a vertex with c children is
    visited 1 + c times, so multiplicities stay within the degree + 1 <= 2N.

    Args:
        tree: Finite tree containing root
        root: Start and end of the walk
        bound: Maximum degree N the tree is expected to respect
        order: Sort key for children, for a deterministic walk
        counters: Shared per-vertex label counters, so clone labels stay unique
            across several walks

    Returns:
        CloneWalk whose entries use the original label on first appearance
    """
    if root not in tree:
        raise ContractViolation(f"Root {root} is not in the tree")
    if tree.number_of_nodes() > 1 and not nx.is_tree(tree):
        raise ContractViolation("Clone walks need a tree")
    if bound is not None and tree.number_of_nodes() > 1:
        degree = max(d for _, d in tree.degree())
        if degree > bound:
            raise ContractViolation(f"Tree degree {degree} exceeds the declared bound {bound}")

    counters = {} if counters is None else counters
    walk: List[str] = []
    originals: List[str] = []
    multiplicity: Dict[str, int] = {}
    clones: Dict[str, str] = {}

    def emit(vertex: str) -> None:
        label = _fresh_label(vertex, counters)
        if label != vertex:
            clones[label] = vertex
        walk.append(label)
        originals.append(vertex)
        multiplicity[vertex] = multiplicity.get(vertex, 0) + 1

    emit(root)
    stack = [(root, iter(sorted(tree[root], key=order)))]
    while stack:
        vertex, children = stack[-1]
        parent = stack[-2][0] if len(stack) > 1 else None
        child = next(children, None)
        if child is None:
            stack.pop()
            if stack:
                emit(stack[-1][0])
            continue
        if child == parent:
            continue
        emit(child)
        stack.append((child, iter(sorted(tree[child], key=order))))

    return CloneWalk(root, walk, originals, multiplicity, clones)


@dataclass
class PeeledTree:
    root: str
    rays: List[Ray]
    clones: Dict[str, str]
    # The whole tree when it reaches no exit and needs a carrier ray
    finite: Optional[nx.Graph] = None


def tree_to_rays(
    tree: nx.Graph,
    root: str,
    exits: Dict[str, ContinuationRule],
    order: OrderKey = natural_key,
    counters: Optional[Dict[str, int]] = None,
) -> PeeledTree:
    """
    Decompose a spanning tree into rays ending at exits

    From each root, follow the first child whose subtree reaches an exit until
    an exit is met; the exit's continuation rule carries the ray on. Subtrees
    reaching an exit become new roots, handled by increasing depth. Subtrees
    reaching none are merged with their attaching vertex and replaced by a
    clone walk of the merged tree, so the ray reads x_{n-1}, z_0 .. z_m, x_{n+1}.
    """
    counters = {} if counters is None else counters
    oriented = nx.bfs_tree(tree, root)
    children = {v: sorted(oriented.successors(v), key=order) for v in oriented}
    depth = nx.single_source_shortest_path_length(oriented, root)

    reaches: Dict[str, bool] = {}
    for vertex in reversed(list(nx.topological_sort(oriented))):
        reaches[vertex] = vertex in exits or any(reaches[c] for c in children[vertex])

    if not reaches[root]:
        return PeeledTree(root, [], {}, finite=tree.subgraph(oriented.nodes).copy())

    rays: List[Ray] = []
    clones: Dict[str, str] = {}
    pending: List[Tuple[int, tuple, str]] = [(0, order(root), root)]
    while pending:
        _, _, start = heapq.heappop(pending)
        path = [start]
        while path[-1] not in exits:
            path.append(next(c for c in children[path[-1]] if reaches[c]))

        prefix: List[str] = []
        for step, vertex in enumerate(path):
            following = path[step + 1] if step + 1 < len(path) else None
            dead = []
            for child in children[vertex]:
                if child == following:
                    continue
                if reaches[child]:
                    heapq.heappush(pending, (depth[child], order(child), child))
                else:
                    dead.append(child)
            if not dead:
                prefix.append(_fresh_label(vertex, counters))
                continue
            hanging = {vertex}
            for child in dead:
                hanging.add(child)
                hanging.update(nx.descendants(oriented, child))
            walk = make_clone_walk(tree.subgraph(hanging), vertex, order=order, counters=counters)
            prefix.extend(walk.walk)
            clones.update(walk.clones)

        rays.append(Ray(len(rays), prefix, exits[path[-1]]))
    return PeeledTree(root, rays, clones)


def _counters_of(witness: RayStructureWitness) -> Dict[str, int]:
    counters: Dict[str, int] = {}
    for label in witness.labels():
        vertex = original_of(label)
        counters[vertex] = counters.get(vertex, 0) + 1
    return counters


def attach_finite(
    witness: RayStructureWitness,
    finite_tree: nx.Graph,
    model: PointModel,
    order: OrderKey = natural_key,
) -> RayStructureWitness:
    """
    Hang a finite tree from the nearest vertex x of a carrier ray

    The tree plus the connecting edge is walked from x and the walk is spliced
    in right after x. The Lipschitz constant grows to cover the new edge.
    """
    if finite_tree.number_of_nodes() == 0:
        return witness
    if not witness.rays:
        raise SynthesisRefused("No infinite component carries a ray; finite parts cannot be attached")

    finite_points = [model.resolve(v) for v in sorted(finite_tree.nodes, key=order)]
    best: Optional[Tuple[Length, int, int, str]] = None
    for ray in witness.rays:
        for position, label in enumerate(ray.prefix):
            if label != original_of(label):
                continue
            carrier = model.resolve(label)
            for point in finite_points:
                d = model.distance(carrier, point)
                if best is None or d < best[0]:
                    best = (d, ray.id, position, point.label)
    if best is None:
        raise SynthesisRefused("Carrier rays list no original vertex to attach to")

    gap, ray_id, position, target = best
    ray = next(r for r in witness.rays if r.id == ray_id)
    anchor = ray.prefix[position]
    enlarged = nx.Graph(finite_tree)
    enlarged.add_edge(anchor, target)

    counters = _counters_of(witness)
    # The anchor keeps its place in the ray; the walk continues after it
    counters[anchor] = counters.get(anchor, 1)
    walk = make_clone_walk(enlarged, anchor, order=order, counters=counters)
    spliced = walk.walk[1:]
    walk.clones.pop(walk.walk[0], None)
    ray.prefix[position + 1 : position + 1] = spliced

    steps = [gap] + [
        model.distance(model.resolve(a), model.resolve(b)) for a, b in finite_tree.edges
    ]
    constant = max([witness.lipschitz_c, *steps])
    logger.info("Attached %d finite vertices to ray %d at %s", finite_tree.number_of_nodes(), ray_id, anchor)
    return RayStructureWitness(
        lipschitz_c=_round_up(constant),
        rays=witness.rays,
        clones={**witness.clones, **walk.clones},
        metric_convention=witness.metric_convention,
    )


def _materialize(model: PointModel, ray: Ray, length: int) -> None:
    """Grow a ray's listed prefix to the given length from its continuation"""
    if ray.continuation is None or len(ray.prefix) >= length:
        return
    extra = model.continuation_points(ray.continuation, length - len(ray.prefix))
    ray.prefix.extend(p.label for p in extra)
    ray.continuation = ray.continuation.reanchored(extra[-1].label)


def _ray_steps(model: PointModel, ray: Ray) -> Iterator[Tuple[int, str, str, Length]]:
    """Consecutive steps of a ray, continuing into its rule when it has one"""
    points = [model.resolve(original_of(label)) for label in ray.prefix]
    for k in range(len(points) - 1):
        yield k, ray.prefix[k], ray.prefix[k + 1], model.distance(points[k], points[k + 1])
    if ray.continuation is not None and points:
        first = model.continuation_points(ray.continuation, 1)[0]
        yield len(points) - 1, ray.prefix[-1], first.label, model.distance(points[-1], first)


def synthesize_ray_structure(
    model: PointModel, window: Window, alpha: Length, threads: int = 1
) -> RayStructureWitness:
    """
    Build a ray structure for the window at scale alpha

    Args:
        model: The point model
        window: Window whose points the rays partition
        alpha: Scale of the Rips graph the spanning trees come from
        threads: Worker threads for the criterion check

    Returns:
        A witness that passes validate_ray_structure

    Raises:
        SynthesisRefused: when the criterion is not satisfied at alpha
    """
    verdict = decide_criterion(model, window, alpha, threads)
    if verdict.outcome is not Outcome.SATISFIED:
        logger.warning("Refusing ray synthesis for %s: criterion %s", model.name, verdict.outcome.value)
        raise SynthesisRefused(
            f"criterion {verdict.outcome.value} up to alpha={alpha}: "
            + (verdict.rule or "no scale leaves D(alpha) without finite components")
        )

    graph = build_rips(window, alpha, model)
    certs = classify_components(model, graph, window)
    blocked = [c for c in certs if c.status is not Status.CERTIFIED_INFINITE]
    if blocked:
        first = blocked[0]
        raise SynthesisRefused(
            f"{len(blocked)} components of D({alpha}) are not certified infinite, "
            f"first {list(first.members[:5])} is {first.status.value}"
        )

    def order(label: str) -> tuple:
        return model.sort_key(window.point(label))

    full = graph.to_networkx()
    counters: Dict[str, int] = {}
    rays: List[Ray] = []
    clones: Dict[str, str] = {}
    leftovers: List[nx.Graph] = []
    for members in graph.components:
        points = [window.point(label) for label in members]
        exits = model.exits(window, points)
        component = full.subgraph(members)
        tree = nx.bfs_tree(component, members[0]).to_undirected()
        peeled = tree_to_rays(tree, members[0], exits, order=order, counters=counters)
        if peeled.finite is not None:
            leftovers.append(peeled.finite)
            continue
        for ray in peeled.rays:
            rays.append(Ray(len(rays), ray.prefix, ray.continuation))
        clones.update(peeled.clones)

    witness = RayStructureWitness(ZERO, rays, clones)
    for tree in leftovers:
        witness = attach_finite(witness, tree, model, order=order)

    diameter = model.diameter_bound(window.points)
    length = math.ceil(2 * diameter.upper_rational() / alpha.upper_rational())
    for ray in witness.rays:
        _materialize(model, ray, length)

    steps = [d for ray in witness.rays for *_, d in _ray_steps(model, ray)]
    steps += [model.continuation_step(r.continuation) for r in witness.rays if r.continuation]
    witness.lipschitz_c = _round_up(max([witness.lipschitz_c, *steps]))
    logger.info(
        "Ray structure for %s at alpha=%s: %d rays, %d clones, C=%s",
        model.name,
        alpha,
        len(witness.rays),
        len(witness.clones),
        witness.lipschitz_c,
    )
    return witness


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    counterexample: Optional[str] = None


@dataclass(frozen=True)
class ValidationReport:
    checks: Tuple[Check, ...]

    @property
    def ok(self) -> bool:
        return all(c.passed for c in self.checks)

    def check(self, name: str) -> Check:
        return next(c for c in self.checks if c.name == name)

    def to_schema(self) -> ValidationReportSchema:
        return ValidationReportSchema(
            ok=self.ok,
            checks=[
                CheckSchema(name=c.name, passed=c.passed, counterexample=c.counterexample)
                for c in self.checks
            ],
        )


def _first_failure(problems: Iterator[str]) -> Optional[str]:
    return next(problems, None)


def validate_ray_structure(
    witness: RayStructureWitness, model: PointModel, window: Optional[Window] = None
) -> ValidationReport:
    """
    Check a witness against the model; failures are reported, never raised

    Checks: labels resolve, partition (no label in two rays), injectivity
    (no label twice in a ray), covering of the window when one is given,
    step bound, clone proximity, continuation rule validity, rules avoiding
    listed labels, and rules avoiding each other.
    """
    constant = witness.lipschitz_c
    resolved: Dict[str, Point] = {}

    def labels_resolve() -> Iterator[str]:
        for ray in witness.rays:
            for label in ray.prefix:
                vertex = original_of(label)
                if label != vertex and witness.clones.get(label) != vertex:
                    yield f"clone {label} is not recorded as a clone of {vertex}"
                    continue
                try:
                    resolved[vertex] = model.resolve(vertex)
                except UnknownLabel as exc:
                    yield str(exc)

    def partition() -> Iterator[str]:
        owner: Dict[str, int] = {}
        for ray in witness.rays:
            for label in dict.fromkeys(ray.prefix):
                if label in owner and owner[label] != ray.id:
                    yield f"{label} appears in rays {owner[label]} and {ray.id}"
                owner[label] = ray.id

    def injectivity() -> Iterator[str]:
        for ray in witness.rays:
            seen: Dict[str, int] = {}
            for k, label in enumerate(ray.prefix):
                if label in seen:
                    yield f"ray {ray.id} lists {label} at {seen[label]} and {k}"
                seen[label] = k

    def covering() -> Iterator[str]:
        if window is None:
            return
        listed = set(witness.labels())
        for label in window.labels:
            if label not in listed:
                yield f"window point {label} is on no ray"

    def step_bound() -> Iterator[str]:
        for ray in witness.rays:
            try:
                for k, a, b, d in _ray_steps(model, ray):
                    if d > constant:
                        yield f"ray {ray.id} step {k} ({a} -> {b}) has length {d} > {constant}"
                if ray.continuation is not None:
                    step = model.continuation_step(ray.continuation)
                    if step > constant:
                        yield f"ray {ray.id} continuation steps reach {step} > {constant}"
            except (ModelError, UnknownLabel) as exc:
                yield f"ray {ray.id}: {exc}"

    def clone_proximity() -> Iterator[str]:
        for label, vertex in witness.clones.items():
            if original_of(label) != vertex:
                yield f"clone {label} names original {vertex}"
                continue
            try:
                model.resolve(vertex)
            except UnknownLabel:
                yield f"clone {label} has no original {vertex} in the model"

    def rule_validity() -> Iterator[str]:
        for ray in witness.rays:
            rule = ray.continuation
            if rule is None:
                continue
            problem = model.continuation_problem(rule)
            if problem is not None:
                yield f"ray {ray.id}: {problem}"
            elif not ray.prefix or original_of(ray.prefix[-1]) != rule.anchor:
                yield f"ray {ray.id}: rule anchor {rule.anchor} is not the last listed point"

    def rules_avoid_labels() -> Iterator[str]:
        rules = [(r.id, r.continuation) for r in witness.rays if r.continuation is not None]
        if not rules:
            return
        for label in dict.fromkeys(original_of(label) for label in witness.labels()):
            point = resolved.get(label)
            if point is None:
                continue
            for ray_id, rule in rules:
                if model.continuation_contains(rule, point):
                    yield f"continuation of ray {ray_id} runs through listed point {label}"

    def rules_avoid_rules() -> Iterator[str]:
        rules = [(r.id, r.continuation) for r in witness.rays if r.continuation is not None]
        for (i, a), (j, b) in ((x, y) for n, x in enumerate(rules) for y in rules[n + 1 :]):
            if model.continuations_meet(a, b):
                yield f"continuations of rays {i} and {j} meet"

    checks = [
        ("labels-resolve", labels_resolve),
        ("partition", partition),
        ("injectivity", injectivity),
        ("covering", covering),
        ("step-bound", step_bound),
        ("clone-proximity", clone_proximity),
        ("rule-validity", rule_validity),
        ("rule-vs-label", rules_avoid_labels),
        ("rule-vs-rule", rules_avoid_rules),
    ]
    results = []
    for name, run in checks:
        failure = _first_failure(run())
        results.append(Check(name, failure is None, failure))
        if failure is not None:
            logger.warning("Ray structure check %s failed: %s", name, failure)
    return ValidationReport(tuple(results))


def trap_conflict(
    witness: RayStructureWitness, certificate: ComponentCertificate, model: PointModel
) -> Optional[str]:
    """
    Show that a ray cannot pass through an isolated finite component

    A CertifiedFinite component whose margin exceeds the witness constant
    traps every ray entering it: the ray must leave by a step longer than C.
    Returns that step (or the ray ending inside), None when no ray meets it.
    """
    if certificate.status is not Status.CERTIFIED_FINITE:
        raise ContractViolation("Trap checks need a CertifiedFinite component")
    if certificate.margin is not None and certificate.margin <= witness.lipschitz_c:
        raise ContractViolation(
            f"Margin {certificate.margin} does not exceed the constant {witness.lipschitz_c}"
        )
    members: Set[str] = set(certificate.members)
    for ray in witness.rays:
        inside = [original_of(label) in members for label in ray.prefix]
        if not any(inside):
            continue
        for k, a, b, d in _ray_steps(model, ray):
            if inside[k] and (k + 1 >= len(inside) or not inside[k + 1]):
                return f"ray {ray.id} leaves the component at step {k} ({a} -> {b}) of length {d}"
        return f"ray {ray.id} ends inside the finite component {sorted(members)[:5]}"
    return None


def witness_prefix_points(model: PointModel, labels: Sequence[str]) -> List[Point]:
    return [model.resolve(original_of(label)) for label in labels]
