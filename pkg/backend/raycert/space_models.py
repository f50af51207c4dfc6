"""
Uniformly discrete point models of bounded geometry.

Finite clouds and symbolic infinite models (lattices, lattices with defects,
cluster sequences, wedges of rays, translates) share one interface: label
resolution, exact distances, box enumeration, and the model-level oracles used
by the analysis (infinitude and persistence rules, isolation horizons, ray
exits and their continuation rules).

Positions are rational and their coordinates are 1-Lipschitz for the model's
metric, so the box around a point set grown by h holds every model point
within distance h of it.
"""

import itertools
import json
import logging
import math
import re
import threading
from abc import ABC, abstractmethod
from dataclasses import dataclass, field, replace
from fractions import Fraction
from functools import cached_property, lru_cache
from pathlib import Path
from typing import Dict, Iterable, Iterator, List, Optional, Sequence, Tuple, Union

import networkx as nx
from django.conf import settings
from pydantic import ValidationError

from .exceptions import ModelError, RegionError, UnknownLabel
from .lengths import ZERO, Length, Number, as_fraction
from .schemas import (
    AuditSchema,
    BallSchema,
    BoxSchema,
    GapRuleSchema,
    LabelledPointSchema,
    ModelDescription,
    WindowSchema,
)

logger = logging.getLogger(__name__)

Position = Tuple[Fraction, ...]

# Gap rules are evaluated lazily; this caps the search for a witness cluster
_MAX_CLUSTER_SEARCH = 1_000_000


def natural_key(label: str) -> tuple:
    """Sort key ordering embedded integers numerically ("p2" < "p10")"""
    return tuple(
        (0, int(part)) if part.isdigit() else (1, part)
        for part in re.split(r"(\d+)", label)
        if part
    )


@lru_cache(maxsize=1 << 16)
def _split_index(label: str) -> Optional[Tuple[int, ...]]:
    try:
        return tuple(int(part) for part in label.split(","))
    except ValueError:
        return None


def as_position(values: Iterable[Number]) -> Position:
    return tuple(as_fraction(v) for v in values)


@dataclass(frozen=True, slots=True)
class Point:
    label: str
    position: Position


@dataclass(frozen=True)
class Box:
    """Closed axis-aligned box"""

    lower: Position
    upper: Position

    def __post_init__(self) -> None:
        if not self.lower or len(self.lower) != len(self.upper):
            raise RegionError("Box bounds must be nonempty and of equal dimension")
        if any(lo > hi for lo, hi in zip(self.lower, self.upper)):
            raise RegionError(f"Empty box {self}")

    @classmethod
    def from_bounds(cls, lower: Sequence[Number], upper: Sequence[Number]) -> "Box":
        try:
            return cls(as_position(lower), as_position(upper))
        except ModelError as exc:
            raise RegionError(f"Unbounded or malformed box bound: {exc}") from exc

    @classmethod
    def around(cls, positions: Iterable[Position], margin: Length = ZERO) -> "Box":
        """Bounding box of the positions, grown by margin on every side"""
        positions = list(positions)
        if not positions:
            raise RegionError("Cannot bound an empty point set")
        grow = margin.upper_rational()
        dim = len(positions[0])
        lower = tuple(min(p[i] for p in positions) - grow for i in range(dim))
        upper = tuple(max(p[i] for p in positions) + grow for i in range(dim))
        return cls(lower, upper)

    @property
    def dim(self) -> int:
        return len(self.lower)

    def contains(self, position: Position) -> bool:
        return all(lo <= x <= hi for lo, x, hi in zip(self.lower, position, self.upper))

    def translated(self, offset: Position) -> "Box":
        return Box(
            tuple(lo + o for lo, o in zip(self.lower, offset)),
            tuple(hi + o for hi, o in zip(self.upper, offset)),
        )

    def __str__(self) -> str:
        lower = ",".join(str(x) for x in self.lower)
        upper = ",".join(str(x) for x in self.upper)
        return f"box:{lower}:{upper}"


@dataclass(frozen=True)
class Ball:
    """Closed metric ball around a model point"""

    center: str
    radius: Length

    def __str__(self) -> str:
        return f"ball:{self.center}:{self.radius}"


Region = Union[Box, Ball]


@dataclass(frozen=True)
class Window:
    region: Region
    points: Tuple[Point, ...]

    def __len__(self) -> int:
        return len(self.points)

    def __iter__(self) -> Iterator[Point]:
        return iter(self.points)

    @cached_property
    def labels(self) -> Tuple[str, ...]:
        return tuple(p.label for p in self.points)

    @cached_property
    def index(self) -> Dict[str, int]:
        return {p.label: i for i, p in enumerate(self.points)}

    def point(self, label: str) -> Point:
        return self.points[self.index[label]]

    def bounding_box(self) -> Box:
        return Box.around(p.position for p in self.points)


@dataclass(frozen=True)
class ContinuationRule:
    """
    Symbolic tail of a truncated ray: every model point strictly beyond the
    anchor, in the order the rule enumerates them.

    Kinds:
        lattice-direction: anchor + k·spacing·sign·e_axis for k ≥ 1
        wedge-ray: deeper points of the anchor's ray
        cluster-sweep: every cluster point after the anchor in sweep order
    """

    kind: str
    anchor: str
    axis: Optional[int] = None
    sign: Optional[int] = None

    def reanchored(self, label: str) -> "ContinuationRule":
        return replace(self, anchor=label)

    def __str__(self) -> str:
        if self.kind == "lattice-direction":
            return f"{self.kind}({self.anchor}, axis={self.axis}, sign={self.sign:+d})"
        return f"{self.kind}({self.anchor})"


class PointModel(ABC):
    """Common interface of every point model"""

    kind: str = ""

    def __init__(
        self,
        dim: int,
        *,
        name: Optional[str] = None,
        declared_separation: Optional[Length] = None,
        declared_ball_bounds: Optional[Dict[Length, int]] = None,
        default_window: Optional[Region] = None,
    ) -> None:
        if dim < 1:
            raise ModelError("Models have positive dimension")
        self.dim = dim
        self.name = name or self.kind
        self.declared_separation = declared_separation
        self.declared_ball_bounds = dict(declared_ball_bounds or {})
        self.default_window = default_window
        self.description: Optional[ModelDescription] = None

    # Metric and enumeration

    @abstractmethod
    def resolve(self, label: str) -> Point:
        """Point for a label; raises UnknownLabel"""

    @abstractmethod
    def points_in_box(self, box: Box) -> Iterator[Point]:
        """Every model point inside the box, each once"""

    @abstractmethod
    def sort_key(self, point: Point) -> tuple:
        """Deterministic window order"""

    def distance(self, x: Point, y: Point) -> Length:
        return Length.between(x.position, y.position)

    def check_dim(self, box: Box) -> None:
        if box.dim != self.dim:
            raise RegionError(f"Region has dimension {box.dim}, model has {self.dim}")

    @property
    def is_finite(self) -> bool:
        return False

    @property
    def size(self) -> Optional[int]:
        """Number of points for finite models"""
        return None

    # Oracles

    def structural_scales(self, alpha_max: Length) -> List[Length]:
        return []

    def infinitude_rule(self, members: Sequence[Point], alpha: Length) -> Optional[str]:
        """Name of a rule proving the component of members infinite in D(alpha)"""
        return None

    def persistence_rule(self) -> Optional[str]:
        """Name of a rule proving finite components exist in D(alpha) for every alpha"""
        return None

    def margin_horizon(self, members: Sequence[Point], alpha: Length) -> Length:
        return alpha.scaled(2)

    def witness_region(self, alpha: Length) -> Optional[Box]:
        """A region holding a whole finite component of D(alpha), when one is known"""
        return None

    def uncertified_zone(self, alpha: Length) -> Optional[Box]:
        """
        A box holding every point the infinitude rule cannot vouch for, grown
        by alpha. None when the rule covers every point of the model.
        """
        return None

    def exits(self, window: Window, members: Sequence[Point]) -> Dict[str, ContinuationRule]:
        """Members through which a ray may leave the window for good"""
        return {}

    # Continuation rules

    def continuation_problem(self, rule: ContinuationRule) -> Optional[str]:
        return f"{self.kind} models carry no continuation rules"

    def continuation_points(self, rule: ContinuationRule, count: int) -> List[Point]:
        raise ModelError(f"{self.kind} models carry no continuation rules")

    def continuation_step(self, rule: ContinuationRule) -> Length:
        raise ModelError(f"{self.kind} models carry no continuation rules")

    def continuation_contains(self, rule: ContinuationRule, point: Point) -> bool:
        return False

    def continuations_meet(self, a: ContinuationRule, b: ContinuationRule) -> bool:
        return False

    def diameter_bound(self, points: Sequence[Point]) -> Length:
        """Upper bound on the diameter of a point set"""
        box = Box.around(p.position for p in points)
        return Length.between(box.lower, box.upper)

    # Declarations

    def ball_bound(self, radius: Length) -> Optional[int]:
        """Declared N(R') for the least declared R' ≥ radius"""
        candidates = [r for r in self.declared_ball_bounds if r >= radius]
        if not candidates:
            return None
        return self.declared_ball_bounds[min(candidates)]

    def coarse_bound_to(self, other: "PointModel") -> Optional[Length]:
        return None

    def describe(self) -> ModelDescription:
        if self.description is None:
            raise ModelError(f"Model {self.name} has no description")
        return self.description

    def __repr__(self) -> str:
        return f"<{type(self).__name__} {self.name} dim={self.dim}>"


class FiniteCloud(PointModel):
    """Finitely many labelled points of R^dim with the Euclidean metric"""

    kind = "finite_cloud"

    def __init__(self, dim: int, points: Dict[str, Position], **kwargs) -> None:
        super().__init__(dim, **kwargs)
        if not points:
            raise ModelError("A finite cloud needs at least one point")
        seen: Dict[Position, str] = {}
        for label, position in points.items():
            if "#" in label:
                raise ModelError(f"Label {label!r} uses the reserved clone marker '#'")
            if len(position) != dim:
                raise ModelError(f"Point {label} has dimension {len(position)}, expected {dim}")
            if position in seen:
                raise ModelError(f"Points {seen[position]} and {label} coincide")
            seen[position] = label
        self.points = dict(points)

    @property
    def is_finite(self) -> bool:
        return True

    @property
    def size(self) -> int:
        return len(self.points)

    def resolve(self, label: str) -> Point:
        try:
            return Point(label, self.points[label])
        except KeyError:
            raise UnknownLabel(f"No point labelled {label!r} in {self.name}") from None

    def points_in_box(self, box: Box) -> Iterator[Point]:
        self.check_dim(box)
        for label, position in self.points.items():
            if box.contains(position):
                yield Point(label, position)

    def sort_key(self, point: Point) -> tuple:
        return natural_key(point.label)

    def persistence_rule(self) -> Optional[str]:
        return "finite model: every component of every D(alpha) is finite"

    def bounding_box(self) -> Box:
        return Box.around(self.points.values())

    def describe(self) -> ModelDescription:
        return ModelDescription(
            kind="finite_cloud",
            dim=self.dim,
            name=self.name,
            params={
                "points": [
                    {"label": label, "position": [str(x) for x in position]}
                    for label, position in sorted(
                        self.points.items(), key=lambda item: natural_key(item[0])
                    )
                ]
            },
            declared_separation=(
                str(self.declared_separation) if self.declared_separation else None
            ),
            declared_ball_bounds={
                str(radius): bound for radius, bound in self.declared_ball_bounds.items()
            },
        )


class Lattice(PointModel):
    """The lattice spacing·Z^dim, labelled by comma-separated indices"""

    kind = "lattice"

    def __init__(self, dim: int, spacing: Number = 1, **kwargs) -> None:
        super().__init__(dim, **kwargs)
        self.spacing = as_fraction(spacing)
        if self.spacing <= 0:
            raise ModelError("Lattice spacing must be positive")

    @staticmethod
    def index_label(index: Sequence[int]) -> str:
        return ",".join(str(i) for i in index)

    def parse_index(self, label: str) -> Optional[Tuple[int, ...]]:
        index = _split_index(label)
        return index if index is not None and len(index) == self.dim else None

    def lattice_point(self, index: Sequence[int]) -> Point:
        return Point(self.index_label(index), tuple(self.spacing * i for i in index))

    def index_of(self, point: Point) -> Optional[Tuple[int, ...]]:
        return self.parse_index(point.label)

    def is_member(self, index: Tuple[int, ...]) -> bool:
        return True

    def resolve(self, label: str) -> Point:
        index = self.parse_index(label)
        if index is None or not self.is_member(index):
            raise UnknownLabel(f"No point labelled {label!r} in {self.name}")
        return self.lattice_point(index)

    def _index_ranges(self, box: Box) -> List[range]:
        return [
            range(math.ceil(lo / self.spacing), math.floor(hi / self.spacing) + 1)
            for lo, hi in zip(box.lower, box.upper)
        ]

    def points_in_box(self, box: Box) -> Iterator[Point]:
        self.check_dim(box)
        for index in itertools.product(*self._index_ranges(box)):
            if self.is_member(index):
                yield self.lattice_point(index)

    def sort_key(self, point: Point) -> tuple:
        return (0, self.index_of(point))

    def structural_scales(self, alpha_max: Length) -> List[Length]:
        spacing = Length.of(self.spacing)
        return [spacing] if spacing <= alpha_max else []

    def infinitude_rule(self, members: Sequence[Point], alpha: Length) -> Optional[str]:
        if members and alpha >= Length.of(self.spacing):
            return f"lattice: spacing {self.spacing} <= alpha joins every lattice point"
        return None

    # Exits along coordinate directions

    def blocked(self, anchor: Tuple[int, ...], axis: int, sign: int) -> bool:
        """True when the half-line beyond anchor meets a missing lattice point"""
        return False

    def exits(self, window: Window, members: Sequence[Point]) -> Dict[str, ContinuationRule]:
        indices = [i for i in (self.index_of(p) for p in window) if i is not None]
        if not indices:
            return {}
        lowest = [min(i[axis] for i in indices) for axis in range(self.dim)]
        highest = [max(i[axis] for i in indices) for axis in range(self.dim)]
        found: Dict[str, ContinuationRule] = {}
        for point in members:
            index = self.index_of(point)
            if index is None:
                continue
            for axis in range(self.dim):
                for sign, face in ((1, highest[axis]), (-1, lowest[axis])):
                    if index[axis] == face and not self.blocked(index, axis, sign):
                        found[point.label] = ContinuationRule(
                            "lattice-direction", point.label, axis, sign
                        )
                        break
                if point.label in found:
                    break
        return found

    def _rule_anchor(self, rule: ContinuationRule) -> Optional[Tuple[int, ...]]:
        if rule.kind != "lattice-direction":
            return None
        return self.parse_index(rule.anchor)

    def continuation_problem(self, rule: ContinuationRule) -> Optional[str]:
        if rule.kind != "lattice-direction":
            return f"{rule.kind} rules do not apply to lattices"
        anchor = self.parse_index(rule.anchor)
        if anchor is None or not self.is_member(anchor):
            return f"anchor {rule.anchor!r} is not a lattice point"
        if rule.axis is None or not 0 <= rule.axis < self.dim:
            return f"axis {rule.axis} out of range"
        if rule.sign not in (1, -1):
            return f"sign {rule.sign} is not +1 or -1"
        if self.blocked(anchor, rule.axis, rule.sign):
            return f"half-line from {rule.anchor} meets a removed point"
        return None

    def continuation_points(self, rule: ContinuationRule, count: int) -> List[Point]:
        anchor = self._rule_anchor(rule)
        if anchor is None or rule.axis is None or rule.sign is None:
            raise ModelError(f"Invalid lattice rule {rule}")
        points = []
        for k in range(1, count + 1):
            index = list(anchor)
            index[rule.axis] += rule.sign * k
            points.append(self.lattice_point(index))
        return points

    def continuation_step(self, rule: ContinuationRule) -> Length:
        return Length.of(self.spacing)

    def continuation_contains(self, rule: ContinuationRule, point: Point) -> bool:
        anchor = self._rule_anchor(rule)
        index = self.index_of(point)
        if anchor is None or index is None or rule.axis is None or rule.sign is None:
            return False
        if any(index[c] != anchor[c] for c in range(self.dim) if c != rule.axis):
            return False
        return (index[rule.axis] - anchor[rule.axis]) * rule.sign >= 1

    def continuations_meet(self, a: ContinuationRule, b: ContinuationRule) -> bool:
        pa, pb = self._rule_anchor(a), self._rule_anchor(b)
        if pa is None or pb is None:
            return False
        assert a.axis is not None and b.axis is not None
        assert a.sign is not None and b.sign is not None
        others = [c for c in range(self.dim) if c not in (a.axis, b.axis)]
        if any(pa[c] != pb[c] for c in others):
            return False
        if a.axis == b.axis:
            if a.sign == b.sign:
                return True
            # Opposite half-lines on one line overlap iff there is room between them
            return (pb[a.axis] - pa[a.axis]) * a.sign >= 2
        k = (pb[a.axis] - pa[a.axis]) * a.sign
        m = (pa[b.axis] - pb[b.axis]) * b.sign
        return k >= 1 and m >= 1

    def ball_bound(self, radius: Length) -> Optional[int]:
        declared = super().ball_bound(radius)
        if declared is not None:
            return declared
        # Packing bound for the cubic lattice
        return (2 * math.floor(radius.upper_rational() / self.spacing) + 1) ** self.dim


class LatticeWithDefects(Lattice):
    """A lattice with finitely many points removed and off-lattice points added"""

    kind = "lattice_with_defects"

    def __init__(
        self,
        dim: int,
        spacing: Number = 1,
        removed: Iterable[Sequence[int]] = (),
        added: Optional[Dict[str, Position]] = None,
        **kwargs,
    ) -> None:
        super().__init__(dim, spacing, **kwargs)
        self.removed = frozenset(tuple(int(i) for i in index) for index in removed)
        if any(len(index) != dim for index in self.removed):
            raise ModelError("Removed indices must match the lattice dimension")
        self.added = dict(added or {})
        for label, position in self.added.items():
            if len(position) != dim:
                raise ModelError(f"Added point {label} has the wrong dimension")
            if "#" in label or self.parse_index(label) is not None:
                raise ModelError(f"Added label {label!r} clashes with lattice labels")
            if all((x / self.spacing).denominator == 1 for x in position):
                raise ModelError(f"Added point {label} sits on the lattice")
        self.defect_zone: Optional[Box] = (
            Box.around(tuple(self.spacing * i for i in index) for index in self.removed)
            if self.removed
            else None
        )

    def is_member(self, index: Tuple[int, ...]) -> bool:
        return index not in self.removed

    def resolve(self, label: str) -> Point:
        if label in self.added:
            return Point(label, self.added[label])
        return super().resolve(label)

    def index_of(self, point: Point) -> Optional[Tuple[int, ...]]:
        if point.label in self.added:
            return None
        return self.parse_index(point.label)

    def points_in_box(self, box: Box) -> Iterator[Point]:
        yield from super().points_in_box(box)
        for label, position in self.added.items():
            if box.contains(position):
                yield Point(label, position)

    def sort_key(self, point: Point) -> tuple:
        index = self.index_of(point)
        if index is None:
            return (1, natural_key(point.label))
        return (0, index)

    def infinitude_rule(self, members: Sequence[Point], alpha: Length) -> Optional[str]:
        if alpha < Length.of(self.spacing):
            return None
        for point in members:
            if self.index_of(point) is None:
                continue
            if self.defect_zone is None or not self.defect_zone.contains(point.position):
                return (
                    f"lattice with defects: {point.label} lies outside the defect zone "
                    f"and spacing {self.spacing} <= alpha"
                )
        return None

    def uncertified_zone(self, alpha: Length) -> Optional[Box]:
        positions = [tuple(self.spacing * i for i in index) for index in self.removed]
        positions.extend(self.added.values())
        if not positions:
            return None
        return Box.around(positions, alpha)

    def blocked(self, anchor: Tuple[int, ...], axis: int, sign: int) -> bool:
        for index in self.removed:
            if all(index[c] == anchor[c] for c in range(self.dim) if c != axis):
                if (index[axis] - anchor[axis]) * sign >= 1:
                    return True
        return False

    def ball_bound(self, radius: Length) -> Optional[int]:
        declared = PointModel.ball_bound(self, radius)
        if declared is not None:
            return declared
        packing = super().ball_bound(radius)
        return None if packing is None else packing + len(self.added)


@dataclass(frozen=True)
class GapRule:
    """Monotone gap between consecutive clusters"""

    kind: str = "linear"
    slope: Fraction = Fraction(1)
    offset: Fraction = Fraction(1)
    base: Fraction = Fraction(2)
    value: Fraction = Fraction(1)
    cap: Fraction = Fraction(1)
    inner: Optional["GapRule"] = None

    def __post_init__(self) -> None:
        if self.kind == "linear" and (self.slope < 0 or self.slope + self.offset <= 0):
            raise ModelError("Linear gap rules need slope >= 0 and a positive first gap")
        if self.kind == "exponential" and self.base < 1:
            raise ModelError("Exponential gap rules need base >= 1")
        if self.kind == "constant" and self.value <= 0:
            raise ModelError("Constant gaps must be positive")
        if self.kind == "capped" and (self.inner is None or self.cap <= 0):
            raise ModelError("Capped gap rules need an inner rule and a positive cap")
        if self.kind not in {"linear", "exponential", "constant", "capped"}:
            raise ModelError(f"Unknown gap rule {self.kind!r}")

    @classmethod
    def from_schema(cls, schema: GapRuleSchema) -> "GapRule":
        return cls(
            kind=schema.kind,
            slope=as_fraction(schema.slope),
            offset=as_fraction(schema.offset),
            base=as_fraction(schema.base),
            value=as_fraction(schema.value),
            cap=as_fraction(schema.cap),
            inner=cls.from_schema(schema.inner) if schema.inner else None,
        )

    def __call__(self, n: int) -> Fraction:
        match self.kind:
            case "linear":
                return self.slope * n + self.offset
            case "exponential":
                return self.base**n
            case "constant":
                return self.value
            case _:
                assert self.inner is not None
                return min(self.inner(n), self.cap)

    def supremum(self) -> Optional[Fraction]:
        """Least upper bound of the gaps, None when they grow without bound"""
        match self.kind:
            case "linear":
                return None if self.slope > 0 else self.offset
            case "exponential":
                return None if self.base > 1 else Fraction(1)
            case "constant":
                return self.value
            case _:
                assert self.inner is not None
                inner = self.inner.supremum()
                return self.cap if inner is None else min(inner, self.cap)

    def __str__(self) -> str:
        match self.kind:
            case "linear":
                return f"{self.slope}*n+{self.offset}"
            case "exponential":
                return f"{self.base}^n"
            case "constant":
                return str(self.value)
            case _:
                return f"min({self.inner}, {self.cap})"


class ClusterSequence(PointModel):
    """
    Finite clusters F_0, F_1, ... laid out along the first axis.

    Cluster n uses template n mod len(templates), shifted so that its leftmost
    point sits gap(n) after the rightmost point of cluster n-1. Labels are
    "c<n>.<j>" with j the index of the point in its (sorted) template.
    """

    kind = "cluster_sequence"
    _label_pattern = re.compile(r"c(\d+)\.(\d+)")

    def __init__(self, dim: int, templates: Sequence[Sequence[Position]], gap: GapRule, **kwargs) -> None:
        super().__init__(dim, **kwargs)
        if not templates:
            raise ModelError("A cluster sequence needs at least one template")
        normalized: List[Tuple[Position, ...]] = []
        for template in templates:
            if not template:
                raise ModelError("Cluster templates must be nonempty")
            if any(len(p) != dim for p in template):
                raise ModelError("Template points must match the model dimension")
            if len(set(template)) != len(template):
                raise ModelError("Template points must be distinct")
            shift = min(p[0] for p in template)
            normalized.append(tuple(sorted((p[0] - shift, *p[1:]) for p in template)))
        self.templates = normalized
        self.widths = [max(p[0] for p in t) for t in normalized]
        self.gap = gap
        self._offsets: List[Fraction] = [Fraction(0)]
        self._offsets_lock = threading.Lock()

    def template_of(self, n: int) -> Tuple[Position, ...]:
        return self.templates[n % len(self.templates)]

    def offset(self, n: int) -> Fraction:
        with self._offsets_lock:
            while len(self._offsets) <= n:
                m = len(self._offsets)
                gap = self.gap(m)
                if gap <= 0 or (m >= 2 and gap < self.gap(m - 1)):
                    raise ModelError(f"Gap rule {self.gap} is not positive and monotone at n={m}")
                width = self.widths[(m - 1) % len(self.widths)]
                self._offsets.append(self._offsets[-1] + width + gap)
            return self._offsets[n]

    def cluster_points(self, n: int) -> List[Point]:
        base = self.offset(n)
        return [
            Point(f"c{n}.{j}", (p[0] + base, *p[1:]))
            for j, p in enumerate(self.template_of(n))
        ]

    def parse_label(self, label: str) -> Optional[Tuple[int, int]]:
        match = self._label_pattern.fullmatch(label)
        if match is None:
            return None
        n, j = int(match.group(1)), int(match.group(2))
        if j >= len(self.template_of(n)):
            return None
        return n, j

    def resolve(self, label: str) -> Point:
        parsed = self.parse_label(label)
        if parsed is None:
            raise UnknownLabel(f"No point labelled {label!r} in {self.name}")
        n, j = parsed
        return self.cluster_points(n)[j]

    def points_in_box(self, box: Box) -> Iterator[Point]:
        self.check_dim(box)
        n = 0
        while self.offset(n) <= box.upper[0]:
            if self.offset(n) + self.widths[n % len(self.widths)] >= box.lower[0]:
                for point in self.cluster_points(n):
                    if box.contains(point.position):
                        yield point
            n += 1

    def sort_key(self, point: Point) -> tuple:
        parsed = self.parse_label(point.label)
        if parsed is None:
            raise UnknownLabel(f"No point labelled {point.label!r} in {self.name}")
        return parsed

    def diameter(self) -> Length:
        return max(
            (Length.between(p, q) for t in self.templates for p in t for q in t),
            default=ZERO,
        )

    def structural_scales(self, alpha_max: Length) -> List[Length]:
        scales: List[Length] = []
        # Gaps are monotone, so the first one past alpha_max ends the scan
        for n in range(1, 65):
            gap = Length.of(self.gap(n))
            if gap > alpha_max:
                break
            if gap not in scales:
                scales.append(gap)
        chain = self.chain_scale
        if chain is not None and chain <= alpha_max and chain not in scales:
            scales.append(chain)
        return scales

    def _placed_pair(self, a: int, b: int, gap: Fraction) -> Tuple[Tuple[Position, ...], Tuple[Position, ...]]:
        """Templates a and b with b placed gap after a"""
        first = self.templates[a]
        shift = self.widths[a] + gap
        second = tuple((p[0] + shift, *p[1:]) for p in self.templates[b])
        return first, second

    @cached_property
    def chain_scale(self) -> Optional[Length]:
        """Least alpha joining the whole sequence, when the gaps stay bounded"""
        supremum = self.gap.supremum()
        if supremum is None:
            return None
        internal = ZERO
        for template in self.templates:
            graph = nx.Graph()
            graph.add_nodes_from(range(len(template)))
            for i, j in itertools.combinations(range(len(template)), 2):
                graph.add_edge(i, j, weight=Length.between(template[i], template[j]).square)
            tree = nx.minimum_spanning_tree(graph)
            for _, _, square in tree.edges(data="weight"):
                internal = max(internal, Length(square))
        cross = ZERO
        count = len(self.templates)
        for a in range(count):
            first, second = self._placed_pair(a, (a + 1) % count, supremum)
            nearest = min(Length.between(p, q) for p in first for q in second)
            cross = max(cross, nearest)
        return max(internal, cross)

    def infinitude_rule(self, members: Sequence[Point], alpha: Length) -> Optional[str]:
        chain = self.chain_scale
        if members and chain is not None and alpha >= chain:
            return f"cluster chain: gaps bounded by {self.gap.supremum()}, chain scale {chain} <= alpha"
        return None

    def persistence_rule(self) -> Optional[str]:
        if self.gap.supremum() is None:
            return f"gap rule {self.gap} is unbounded: every scale leaves isolated clusters"
        return None

    def margin_horizon(self, members: Sequence[Point], alpha: Length) -> Length:
        clusters = [self.sort_key(p)[0] for p in members]
        if not clusters:
            return alpha.scaled(2)
        lo, hi = min(clusters), max(clusters)
        before = self.gap(lo) if lo >= 1 else Fraction(0)
        after = self.gap(hi + 1)
        reach = max(before, after) + 3 * self.diameter().upper_rational()
        return max(alpha.scaled(2), Length.of(reach))

    def witness_region(self, alpha: Length) -> Optional[Box]:
        supremum = self.gap.supremum()
        if supremum is not None and Length.of(supremum) <= alpha:
            return None
        # Gaps around cluster n are gap(n) and gap(n+1) >= gap(n), both > alpha
        for n in range(1, _MAX_CLUSTER_SEARCH):
            if Length.of(self.gap(n)) > alpha:
                return Box.around(p.position for p in self.cluster_points(n))
        return None

    def exits(self, window: Window, members: Sequence[Point]) -> Dict[str, ContinuationRule]:
        if self.gap.supremum() is None or not len(window):
            return {}
        last = max(window, key=self.sort_key)
        if any(p.label == last.label for p in members):
            return {last.label: ContinuationRule("cluster-sweep", last.label)}
        return {}

    def continuation_problem(self, rule: ContinuationRule) -> Optional[str]:
        if rule.kind != "cluster-sweep":
            return f"{rule.kind} rules do not apply to cluster sequences"
        if self.parse_label(rule.anchor) is None:
            return f"anchor {rule.anchor!r} is not a cluster point"
        if self.gap.supremum() is None:
            return f"gap rule {self.gap} is unbounded, sweep steps are unbounded"
        return None

    def continuation_points(self, rule: ContinuationRule, count: int) -> List[Point]:
        parsed = self.parse_label(rule.anchor)
        if parsed is None:
            raise ModelError(f"Invalid sweep rule {rule}")
        n, j = parsed
        points: List[Point] = []
        while len(points) < count:
            j += 1
            if j >= len(self.template_of(n)):
                n, j = n + 1, 0
            points.append(self.cluster_points(n)[j])
        return points

    def continuation_step(self, rule: ContinuationRule) -> Length:
        supremum = self.gap.supremum()
        if supremum is None:
            raise ModelError(f"Gap rule {self.gap} is unbounded")
        step = ZERO
        for template in self.templates:
            for p, q in zip(template, template[1:]):
                step = max(step, Length.between(p, q))
        count = len(self.templates)
        for a in range(count):
            first, second = self._placed_pair(a, (a + 1) % count, supremum)
            step = max(step, Length.between(first[-1], second[0]))
        return step

    def continuation_contains(self, rule: ContinuationRule, point: Point) -> bool:
        anchor = self.parse_label(rule.anchor)
        parsed = self.parse_label(point.label)
        return rule.kind == "cluster-sweep" and anchor is not None and parsed is not None and parsed > anchor

    def continuations_meet(self, a: ContinuationRule, b: ContinuationRule) -> bool:
        return a.kind == b.kind == "cluster-sweep"

    def ball_bound(self, radius: Length) -> Optional[int]:
        declared = super().ball_bound(radius)
        if declared is not None:
            return declared
        # Gaps are at least gap(1), so a ball meets boundedly many clusters
        first_gap = self.gap(1)
        clusters = math.floor(2 * radius.upper_rational() / first_gap) + 2
        return clusters * max(len(t) for t in self.templates)


class WedgeOfRays(PointModel):
    """
    Rays N x I glued at distance one from each other's basepoints:
    d((k,i),(l,i)) = |k-l| and d((k,i),(l,j)) = k+l+1 for i != j.
    Labels are "<i>:<k>"; the single coordinate is the depth k.
    """

    kind = "wedge_of_rays"

    def __init__(self, index_set: Sequence[str], **kwargs) -> None:
        super().__init__(1, **kwargs)
        if not index_set:
            raise ModelError("A wedge needs at least one ray")
        names = [str(i) for i in index_set]
        if len(set(names)) != len(names) or any(":" in i or "#" in i for i in names):
            raise ModelError("Ray indices must be distinct and free of ':' and '#'")
        self.index_set = names
        self._order = {name: n for n, name in enumerate(names)}

    def parse_label(self, label: str) -> Optional[Tuple[str, int]]:
        ray, sep, depth = label.rpartition(":")
        if not sep or ray not in self._order:
            return None
        try:
            k = int(depth)
        except ValueError:
            return None
        return (ray, k) if k >= 0 else None

    @staticmethod
    def _point(ray: str, k: int) -> Point:
        return Point(f"{ray}:{k}", (Fraction(k),))

    def resolve(self, label: str) -> Point:
        parsed = self.parse_label(label)
        if parsed is None:
            raise UnknownLabel(f"No point labelled {label!r} in {self.name}")
        return self._point(*parsed)

    def distance(self, x: Point, y: Point) -> Length:
        rx, kx = self._parts(x)
        ry, ky = self._parts(y)
        if rx == ry:
            return Length.of(abs(kx - ky))
        return Length.of(kx + ky + 1)

    def _parts(self, point: Point) -> Tuple[str, int]:
        parsed = self.parse_label(point.label)
        if parsed is None:
            raise UnknownLabel(f"No point labelled {point.label!r} in {self.name}")
        return parsed

    def points_in_box(self, box: Box) -> Iterator[Point]:
        self.check_dim(box)
        first = max(0, math.ceil(box.lower[0]))
        last = math.floor(box.upper[0])
        for ray in self.index_set:
            for k in range(first, last + 1):
                yield self._point(ray, k)

    def sort_key(self, point: Point) -> tuple:
        ray, k = self._parts(point)
        return (self._order[ray], k)

    def structural_scales(self, alpha_max: Length) -> List[Length]:
        one = Length.of(1)
        return [one] if one <= alpha_max else []

    def infinitude_rule(self, members: Sequence[Point], alpha: Length) -> Optional[str]:
        if members and alpha >= Length.of(1):
            return "wedge: alpha >= 1 joins every ray through the basepoints"
        return None

    def exits(self, window: Window, members: Sequence[Point]) -> Dict[str, ContinuationRule]:
        deepest: Dict[str, Point] = {}
        for point in window:
            ray, k = self._parts(point)
            if ray not in deepest or self._parts(deepest[ray])[1] < k:
                deepest[ray] = point
        labels = {p.label for p in members}
        return {
            point.label: ContinuationRule("wedge-ray", point.label)
            for point in deepest.values()
            if point.label in labels
        }

    def continuation_problem(self, rule: ContinuationRule) -> Optional[str]:
        if rule.kind != "wedge-ray":
            return f"{rule.kind} rules do not apply to wedges"
        if self.parse_label(rule.anchor) is None:
            return f"anchor {rule.anchor!r} is not a wedge point"
        return None

    def continuation_points(self, rule: ContinuationRule, count: int) -> List[Point]:
        parsed = self.parse_label(rule.anchor)
        if parsed is None:
            raise ModelError(f"Invalid wedge rule {rule}")
        ray, k = parsed
        return [self._point(ray, k + j) for j in range(1, count + 1)]

    def continuation_step(self, rule: ContinuationRule) -> Length:
        return Length.of(1)

    def diameter_bound(self, points: Sequence[Point]) -> Length:
        deepest = max((self._parts(p)[1] for p in points), default=0)
        return Length.of(2 * deepest + 1)

    def continuation_contains(self, rule: ContinuationRule, point: Point) -> bool:
        anchor = self.parse_label(rule.anchor)
        parsed = self.parse_label(point.label)
        if rule.kind != "wedge-ray" or anchor is None or parsed is None:
            return False
        return parsed[0] == anchor[0] and parsed[1] > anchor[1]

    def continuations_meet(self, a: ContinuationRule, b: ContinuationRule) -> bool:
        pa, pb = self.parse_label(a.anchor), self.parse_label(b.anchor)
        return pa is not None and pb is not None and pa[0] == pb[0]

    def ball_bound(self, radius: Length) -> Optional[int]:
        declared = super().ball_bound(radius)
        if declared is not None:
            return declared
        # A ball meets other rays only near the basepoints
        r = math.floor(radius.upper_rational())
        return (2 * r + 1) + (len(self.index_set) - 1) * max(0, r)


class Translated(PointModel):
    """A model shifted by a rational vector; labels are the base labels"""

    kind = "translated"

    def __init__(self, base: PointModel, offset: Position, **kwargs) -> None:
        if isinstance(base, WedgeOfRays):
            raise ModelError("Wedges carry no Euclidean position to translate")
        if len(offset) != base.dim:
            raise ModelError("Offset must match the base model dimension")
        super().__init__(base.dim, **kwargs)
        self.base = base
        self.offset_vector = offset
        self._back = tuple(-x for x in offset)

    def _shift(self, point: Point) -> Point:
        return Point(point.label, tuple(x + o for x, o in zip(point.position, self.offset_vector)))

    def _unshift(self, point: Point) -> Point:
        return Point(point.label, tuple(x - o for x, o in zip(point.position, self.offset_vector)))

    def _unshift_window(self, window: Window) -> Window:
        region = window.region
        if isinstance(region, Box):
            region = region.translated(self._back)
        return Window(region, tuple(self._unshift(p) for p in window))

    @property
    def is_finite(self) -> bool:
        return self.base.is_finite

    @property
    def size(self) -> Optional[int]:
        return self.base.size

    def resolve(self, label: str) -> Point:
        return self._shift(self.base.resolve(label))

    def points_in_box(self, box: Box) -> Iterator[Point]:
        self.check_dim(box)
        for point in self.base.points_in_box(box.translated(self._back)):
            yield self._shift(point)

    def sort_key(self, point: Point) -> tuple:
        return self.base.sort_key(self._unshift(point))

    def distance(self, x: Point, y: Point) -> Length:
        return self.base.distance(self._unshift(x), self._unshift(y))

    def structural_scales(self, alpha_max: Length) -> List[Length]:
        return self.base.structural_scales(alpha_max)

    def infinitude_rule(self, members: Sequence[Point], alpha: Length) -> Optional[str]:
        return self.base.infinitude_rule([self._unshift(p) for p in members], alpha)

    def persistence_rule(self) -> Optional[str]:
        return self.base.persistence_rule()

    def margin_horizon(self, members: Sequence[Point], alpha: Length) -> Length:
        return self.base.margin_horizon([self._unshift(p) for p in members], alpha)

    def witness_region(self, alpha: Length) -> Optional[Box]:
        region = self.base.witness_region(alpha)
        return None if region is None else region.translated(self.offset_vector)

    def uncertified_zone(self, alpha: Length) -> Optional[Box]:
        zone = self.base.uncertified_zone(alpha)
        return None if zone is None else zone.translated(self.offset_vector)

    def exits(self, window: Window, members: Sequence[Point]) -> Dict[str, ContinuationRule]:
        return self.base.exits(self._unshift_window(window), [self._unshift(p) for p in members])

    def continuation_problem(self, rule: ContinuationRule) -> Optional[str]:
        return self.base.continuation_problem(rule)

    def continuation_points(self, rule: ContinuationRule, count: int) -> List[Point]:
        return [self._shift(p) for p in self.base.continuation_points(rule, count)]

    def continuation_step(self, rule: ContinuationRule) -> Length:
        return self.base.continuation_step(rule)

    def continuation_contains(self, rule: ContinuationRule, point: Point) -> bool:
        return self.base.continuation_contains(rule, self._unshift(point))

    def continuations_meet(self, a: ContinuationRule, b: ContinuationRule) -> bool:
        return self.base.continuations_meet(a, b)

    def ball_bound(self, radius: Length) -> Optional[int]:
        declared = super().ball_bound(radius)
        return declared if declared is not None else self.base.ball_bound(radius)

    def coarse_bound_to(self, other: PointModel) -> Optional[Length]:
        if same_model(other, self.base):
            return Length.between(self.offset_vector, tuple(Fraction(0) for _ in self.offset_vector))
        return None


def same_model(a: PointModel, b: PointModel) -> bool:
    """Identity, or equal kind, dimension and parameters in their descriptions"""
    if a is b:
        return True
    if a.description is None or b.description is None:
        return False
    first, second = a.description, b.description
    return (first.kind, first.dim, first.params) == (second.kind, second.dim, second.params)


def distance(model: PointModel, x: str, y: str) -> Length:
    """Distance between two labelled points; raises UnknownLabel"""
    return model.distance(model.resolve(x), model.resolve(y))


def enumerate_window(model: PointModel, region: Region) -> Window:
    """
    Resolve every model point inside a bounded region

    Args:
        model: The point model to enumerate
        region: A Box or a Ball around a model point

    Returns:
        Window with points in the model's deterministic order
    """
    if isinstance(region, Ball):
        center = model.resolve(region.center)
        box = Box.around([center.position], region.radius)
        candidates = (
            p for p in model.points_in_box(box) if model.distance(center, p) <= region.radius
        )
    elif isinstance(region, Box):
        candidates = model.points_in_box(region)
    else:
        raise RegionError(f"Unsupported region {region!r}")

    points = sorted(candidates, key=model.sort_key)
    labels = [p.label for p in points]
    if len(set(labels)) != len(labels):
        raise ModelError(f"Model {model.name} enumerated a label twice")
    logger.debug("Window %s of %s holds %d points", region, model.name, len(points))
    return Window(region, tuple(points))


def close_pairs(model: PointModel, window: Window, alpha: Length) -> List[Tuple[Length, int, int]]:
    """
    All window index pairs (i < j) at distance ≤ alpha, sorted by (length, i, j).

    Candidates come from a bucket grid of cell size alpha over the positions;
    since coordinates are 1-Lipschitz, neighbors sit in adjacent cells.
    """
    cell = alpha.upper_rational()
    if cell <= 0 or len(window) < 2:
        return []
    buckets: Dict[Tuple[int, ...], List[int]] = {}
    for i, point in enumerate(window):
        key = tuple(math.floor(x / cell) for x in point.position)
        buckets.setdefault(key, []).append(i)

    pairs: List[Tuple[Length, int, int]] = []
    steps = list(itertools.product((-1, 0, 1), repeat=model.dim))
    points = window.points
    for key, members in buckets.items():
        for step in steps:
            neighbor = buckets.get(tuple(k + s for k, s in zip(key, step)))
            if not neighbor:
                continue
            for i in members:
                for j in neighbor:
                    if j <= i:
                        continue
                    d = model.distance(points[i], points[j])
                    if d <= alpha:
                        pairs.append((d, i, j))
    pairs.sort(key=lambda item: (item[0].square, item[1], item[2]))
    return pairs


@dataclass
class GeometryAudit:
    window_size: int
    separation: Optional[Length]
    ball_count_table: Dict[Length, int]
    declared_bounds_ok: bool
    violations: List[str] = field(default_factory=list)

    def to_schema(self) -> AuditSchema:
        return AuditSchema(
            window_size=self.window_size,
            separation="inf" if self.separation is None else float(self.separation),
            separation_exact="inf" if self.separation is None else str(self.separation),
            ball_count_table={str(r): n for r, n in self.ball_count_table.items()},
            declared_bounds_ok=self.declared_bounds_ok,
            violations=self.violations,
        )


def audit_geometry(model: PointModel, window: Window, radii: Sequence[Length]) -> GeometryAudit:
    """Separation and ball counts on a window, checked against declared bounds"""
    if not len(window):
        raise ModelError("Cannot audit an empty window")

    points = window.points
    separation: Optional[Length] = None
    for p, q in itertools.combinations(points, 2):
        d = model.distance(p, q)
        if separation is None or d < separation:
            separation = d

    table: Dict[Length, int] = {}
    if radii:
        pairs = close_pairs(model, window, max(radii))
        for radius in sorted(set(radii)):
            counts = [1] * len(points)
            for d, i, j in pairs:
                if d <= radius:
                    counts[i] += 1
                    counts[j] += 1
            table[radius] = max(counts)

    violations = []
    declared = model.declared_separation
    if separation is not None and declared is not None and separation < declared:
        violations.append(f"separation {separation} is below the declared {declared}")
    if separation is not None and separation == ZERO:
        violations.append("two points coincide")
    for radius, count in table.items():
        bound = model.ball_bound(radius)
        if bound is not None and count > bound:
            violations.append(f"{count} points in a ball of radius {radius}, declared {bound}")

    if violations:
        logger.warning("Geometry audit of %s: %s", model.name, "; ".join(violations))
    return GeometryAudit(len(points), separation, table, not violations, violations)


def critical_scales(model: PointModel, window: Window, alpha_max: Length) -> List[Length]:
    """Distinct window distances ≤ alpha_max merged with the model's structural scales"""
    if alpha_max <= ZERO:
        raise ModelError("alpha_max must be positive")
    if len(window) < 2:
        return []
    scales = {d for d, _, _ in close_pairs(model, window, alpha_max)}
    scales.update(model.structural_scales(alpha_max))
    return sorted(scales)


def isolation_margin(
    model: PointModel, members: Sequence[Point], horizon: Length
) -> Tuple[Optional[Length], bool]:
    """
    Distance from members to the rest of the full model.

    Returns (margin, exact). The margin is exact when it is at most the horizon;
    otherwise the horizon is returned as a strict lower bound. None means no
    other point exists at all (a finite model's whole point set).
    """
    labels = {p.label for p in members}
    if model.is_finite and model.size == len(labels):
        return None, True
    box = Box.around((p.position for p in members), horizon)
    best: Optional[Length] = None
    for other in model.points_in_box(box):
        if other.label in labels:
            continue
        for point in members:
            d = model.distance(point, other)
            if best is None or d < best:
                best = d
    if best is not None and best <= horizon:
        return best, True
    return horizon, False


def region_from_schema(schema: WindowSchema) -> Region:
    if schema.box is not None:
        return box_from_schema(schema.box)
    assert schema.ball is not None
    return ball_from_schema(schema.ball)


def box_from_schema(schema: BoxSchema) -> Box:
    return Box.from_bounds(schema.lower, schema.upper)


def ball_from_schema(schema: BallSchema) -> Ball:
    try:
        return Ball(schema.center, Length.of(schema.radius))
    except ModelError as exc:
        raise RegionError(f"Unbounded or malformed ball radius: {exc}") from exc


def parse_region(text: str) -> Region:
    """
    Parse a command-line window: "box:LOWER:UPPER" with comma-separated
    coordinates, or "ball:LABEL:RADIUS" (the label may contain colons).
    """
    kind, _, rest = text.partition(":")
    if kind == "box":
        lower, sep, upper = rest.partition(":")
        if not sep:
            raise RegionError(f"Malformed box window {text!r}")
        return Box.from_bounds(lower.split(","), upper.split(","))
    if kind == "ball":
        center, sep, radius = rest.rpartition(":")
        if not sep:
            raise RegionError(f"Malformed ball window {text!r}")
        try:
            return Ball(center, Length.of(radius))
        except ModelError as exc:
            raise RegionError(f"Unbounded or malformed ball radius: {exc}") from exc
    raise RegionError(f"Unknown window kind in {text!r}; use box:... or ball:...")


def default_region(model: PointModel) -> Region:
    if model.default_window is not None:
        return model.default_window
    if isinstance(model, FiniteCloud):
        return model.bounding_box()
    raise RegionError(f"Model {model.name} declares no window; pass one explicitly")


def _labelled_points(raw: object, dim: int) -> Dict[str, Position]:
    try:
        items = [LabelledPointSchema.model_validate(item) for item in raw or []]  # type: ignore[union-attr]
    except (ValidationError, TypeError) as exc:
        raise ModelError(f"Malformed point list: {exc}") from exc
    points: Dict[str, Position] = {}
    for item in items:
        if item.label in points:
            raise ModelError(f"Duplicate label {item.label!r}")
        position = as_position(item.position)
        if len(position) != dim:
            raise ModelError(f"Point {item.label} has dimension {len(position)}, expected {dim}")
        points[item.label] = position
    return points


def model_from_description(description: ModelDescription) -> PointModel:
    """Build a point model from a validated description"""
    params = description.params
    dim = description.dim
    common = {
        "name": description.name,
        "declared_separation": (
            Length.of(description.declared_separation)
            if description.declared_separation is not None
            else None
        ),
        "declared_ball_bounds": {
            Length.of(radius): bound for radius, bound in description.declared_ball_bounds.items()
        },
    }

    model: PointModel
    match description.kind:
        case "finite_cloud":
            model = FiniteCloud(dim, _labelled_points(params.get("points"), dim), **common)
        case "lattice":
            model = Lattice(dim, params.get("spacing", 1), **common)
        case "lattice_with_defects":
            model = LatticeWithDefects(
                dim,
                params.get("spacing", 1),
                removed=params.get("removed", []),
                added=_labelled_points(params.get("added"), dim),
                **common,
            )
        case "cluster_sequence":
            templates = [as_positions(t) for t in params.get("templates", [])]
            try:
                gap_schema = GapRuleSchema.model_validate(params.get("gap", {}))
            except ValidationError as exc:
                raise ModelError(f"Malformed gap rule: {exc}") from exc
            model = ClusterSequence(dim, templates, GapRule.from_schema(gap_schema), **common)
        case "wedge_of_rays":
            model = WedgeOfRays([str(i) for i in params.get("index_set", [])], **common)
            if dim != 1:
                raise ModelError("Wedges of rays have dimension 1")
        case "translated":
            try:
                base_description = ModelDescription.model_validate(params.get("base"))
            except ValidationError as exc:
                raise ModelError(f"Malformed base model: {exc}") from exc
            base = model_from_description(base_description)
            model = Translated(base, as_position(params.get("offset", [])), **common)
        case _:
            raise ModelError(f"Unknown model kind {description.kind!r}")

    if description.window is not None:
        model.default_window = region_from_schema(description.window)
    model.description = description
    return model


def as_positions(raw: Iterable[Sequence[Number]]) -> List[Position]:
    return [as_position(p) for p in raw]


def load_model(path: Union[str, Path]) -> PointModel:
    """Read a JSON model description; malformed input raises ModelError"""
    path = Path(path)
    try:
        payload = json.loads(path.read_text())
    except OSError as exc:
        raise ModelError(f"Cannot read model file {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ModelError(f"Model file {path} is not valid JSON: {exc}") from exc
    try:
        description = ModelDescription.model_validate(payload)
    except ValidationError as exc:
        raise ModelError(f"Invalid model description in {path}: {exc}") from exc
    model = model_from_description(description)
    logger.info("Loaded %r from %s", model, path)
    return model


def bundled_model_paths() -> List[Path]:
    return sorted((Path(settings.RAYCERT_BUNDLED_DIR) / "models").glob("*.json"))


def bundled_models() -> Dict[str, PointModel]:
    """Every bundled model keyed by file stem"""
    return {path.stem: load_model(path) for path in bundled_model_paths()}
