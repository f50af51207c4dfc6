"""
Maximal r-disjoint nets in sampled domains.

Samples live on the integer grid scaled by the resolution h, so every distance
comparison is an exact integer comparison on squared grid distances.
"""

import itertools
import json
import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import ValidationError

from .exceptions import ModelError, NetError
from .lengths import Length, Number, as_fraction, length_out
from .rips_multiscale import build_rips
from .schemas import DomainDescription, NetReportSchema, SplitSchema
from .space_models import Box, FiniteCloud, audit_geometry, enumerate_window

logger = logging.getLogger(__name__)

# Samples per chunk when measuring distances to the net
_CHUNK = 4096


@dataclass(frozen=True)
class DomainSample:
    """Grid sample h·Z^dim ∩ region of a domain"""

    shape: str
    resolution: Fraction
    grid: np.ndarray
    declared_connected: bool = True

    @property
    def dim(self) -> int:
        return int(self.grid.shape[1])

    @property
    def size(self) -> int:
        return int(self.grid.shape[0])

    def position(self, i: int) -> Tuple[Fraction, ...]:
        return tuple(self.resolution * int(x) for x in self.grid[i])


def _axis_range(lo: Fraction, hi: Fraction, h: Fraction) -> range:
    return range(math.ceil(lo / h), math.floor(hi / h) + 1)


def _box_indices(bounds: Sequence[Sequence[Number]], h: Fraction) -> List[Tuple[int, ...]]:
    axes = []
    for pair in bounds:
        if len(pair) != 2:
            raise NetError("Box bounds are [lower, upper] pairs per axis")
        lo, hi = as_fraction(pair[0]), as_fraction(pair[1])
        if lo > hi:
            raise NetError(f"Empty box axis [{lo}, {hi}]")
        axes.append(_axis_range(lo, hi, h))
    return list(itertools.product(*axes))


def _round_indices(description: DomainDescription, h: Fraction) -> List[Tuple[int, ...]]:
    if description.radius is None or not description.center:
        raise NetError(f"A {description.shape} needs a center and a radius")
    center = [as_fraction(c) for c in description.center]
    outer = as_fraction(description.radius)
    inner = as_fraction(description.inner_radius) if description.inner_radius is not None else Fraction(0)
    if description.shape == "annulus" and description.inner_radius is None:
        raise NetError("An annulus needs an inner radius")
    if not 0 <= inner < outer:
        raise NetError("Radii must satisfy 0 <= inner < outer")
    bounds = [(c - outer, c + outer) for c in center]
    indices = []
    for index in _box_indices(bounds, h):
        square = sum(((h * i - c) ** 2 for i, c in zip(index, center)), Fraction(0))
        if inner * inner <= square <= outer * outer:
            indices.append(index)
    return indices


def domain_from_description(description: DomainDescription) -> DomainSample:
    h = as_fraction(description.resolution)
    if h <= 0:
        raise NetError("Resolution must be positive")

    match description.shape:
        case "box":
            indices = _box_indices(description.bounds, h)
        case "disk" | "annulus":
            indices = _round_indices(description, h)
        case "boxes":
            if not description.boxes:
                raise NetError("A union of boxes needs at least one box")
            indices = sorted({i for bounds in description.boxes for i in _box_indices(bounds, h)})
        case _:
            raise NetError(f"Unknown domain shape {description.shape!r}")

    if not indices:
        raise NetError("The domain sample is empty")
    dims = {len(i) for i in indices}
    if len(dims) != 1:
        raise NetError("Domain parts must share one dimension")
    grid = np.array(sorted(set(indices)), dtype=np.int64)
    logger.debug("Sampled %s domain: %d points at h=%s", description.shape, len(grid), h)
    return DomainSample(description.shape, h, grid, declared_connected=description.shape != "boxes")


def load_domain(path: Union[str, Path]) -> DomainSample:
    path = Path(path)
    try:
        payload = json.loads(path.read_text())
        description = DomainDescription.model_validate(payload)
    except OSError as exc:
        raise ModelError(f"Cannot read domain file {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ModelError(f"Domain file {path} is not valid JSON: {exc}") from exc
    except ValidationError as exc:
        raise ModelError(f"Invalid domain description in {path}: {exc}") from exc
    return domain_from_description(description)


def _scaled_threshold(r: Fraction, h: Fraction) -> Tuple[int, int]:
    """(p², q²) with r/h = p/q, so d ≤ r ⇔ grid_d² · q² ≤ p²"""
    ratio = r / h
    return ratio.numerator**2, ratio.denominator**2


def _squared_to(grid: np.ndarray, point: np.ndarray) -> np.ndarray:
    diff = grid - point
    return np.einsum("ij,ij->i", diff, diff)


@dataclass
class Net:
    domain: DomainSample
    r: Fraction
    indices: List[int]

    def grid(self) -> np.ndarray:
        return self.domain.grid[self.indices]

    def labels(self) -> List[str]:
        return [f"n{k}" for k in range(len(self.indices))]

    def to_model(self, name: str = "net") -> FiniteCloud:
        """The net as a finite cloud, labelled n0, n1, ... in greedy order"""
        points = {
            label: self.domain.position(i) for label, i in zip(self.labels(), self.indices)
        }
        return FiniteCloud(self.domain.dim, points, name=name, declared_separation=Length.of(self.r))


def build_net(domain: DomainSample, r: Number) -> Net:
    """
    Greedy maximal r-disjoint subset of the sample

    Samples are scanned in grid order; a sample joins the net when it is
    farther than r from every net point.
    """
    radius = as_fraction(r)
    h = domain.resolution
    if radius <= 2 * h:
        raise NetError(f"r={radius} must exceed 2h={2 * h} so sampling cannot break the net")

    p2, q2 = _scaled_threshold(radius, h)
    covered = np.zeros(domain.size, dtype=bool)
    indices: List[int] = []
    for i in range(domain.size):
        if covered[i]:
            continue
        indices.append(i)
        covered |= _squared_to(domain.grid, domain.grid[i]) * q2 <= p2
    logger.info("Net with r=%s on %d samples: %d points", radius, domain.size, len(indices))
    return Net(domain, radius, indices)


@dataclass
class Split:
    first: List[str]
    second: List[str]
    gap: Length
    first_region_size: int
    second_region_size: int

    def to_schema(self) -> SplitSchema:
        return SplitSchema(
            first=self.first,
            second=self.second,
            gap=length_out(self.gap),
            first_region_size=self.first_region_size,
            second_region_size=self.second_region_size,
        )


@dataclass
class NetReport:
    net_size: int
    r: Fraction
    separation: Optional[Length]
    separation_ok: bool
    covering_radius: Optional[Length]
    covering_ok: bool
    maximal: bool
    connectivity_3r_ok: bool
    packing_ok: bool
    declared_connected: bool
    split: Optional[Split] = None
    packing_counts: dict = field(default_factory=dict)

    @property
    def ok(self) -> bool:
        return all(
            (self.separation_ok, self.covering_ok, self.maximal, self.connectivity_3r_ok, self.packing_ok)
        )

    def to_schema(self) -> NetReportSchema:
        return NetReportSchema(
            net_size=self.net_size,
            r=float(self.r),
            separation_ok=self.separation_ok,
            separation=length_out(self.separation),
            covering_radius=length_out(self.covering_radius),
            covering_ok=self.covering_ok,
            maximal=self.maximal,
            connectivity_3r_ok=self.connectivity_3r_ok,
            packing_ok=self.packing_ok,
            declared_connected=self.declared_connected,
            split=self.split.to_schema() if self.split else None,
        )


def _nearest_squares(samples: np.ndarray, net: np.ndarray) -> np.ndarray:
    """Squared grid distance from every sample to its nearest net point"""
    best = np.empty(len(samples), dtype=np.int64)
    for start in range(0, len(samples), _CHUNK):
        chunk = samples[start : start + _CHUNK]
        diff = chunk[:, None, :] - net[None, :, :]
        best[start : start + _CHUNK] = np.einsum("ijk,ijk->ij", diff, diff).min(axis=1)
    return best


def check_net(net: Net, domain: DomainSample, r: Optional[Number] = None) -> NetReport:
    """
    Verify separation, covering, maximality, packing and D(3r) connectivity

    Failures are report content. When D(3r) is disconnected the first
    component and the rest are reported with the sample regions they cover.
    """
    radius = net.r if r is None else as_fraction(r)
    h = domain.resolution
    p2, q2 = _scaled_threshold(radius, h)
    points = net.grid()
    size = len(points)
    scale = h * h

    separation: Optional[Length] = None
    if size > 1:
        diff = points[:, None, :] - points[None, :, :]
        squares = np.einsum("ijk,ijk->ij", diff, diff)
        np.fill_diagonal(squares, np.iinfo(np.int64).max)
        separation = Length(Fraction(int(squares.min())) * scale)
    separation_ok = separation is None or separation > Length.of(radius)

    if size == 0:
        logger.warning("Empty net on a domain of %d samples", domain.size)
        return NetReport(
            0, radius, None, True, None, False, domain.size == 0, False, True, domain.declared_connected
        )

    nearest = _nearest_squares(domain.grid, points)
    covering = Length(Fraction(int(nearest.max())) * scale)
    covering_ok = int(nearest.max()) * q2 <= p2
    outside = np.ones(domain.size, dtype=bool)
    outside[net.indices] = False
    maximal = bool(np.all(nearest[outside] * q2 <= p2))

    model = net.to_model()
    window = enumerate_window(model, model.bounding_box())
    graph = build_rips(window, Length.of(3 * radius), model)
    connected = len(graph.components) == 1

    radii = [Length.of(radius * k) for k in (1, 2, 3)]
    audit = audit_geometry(model, window, radii)
    packing = {}
    packing_ok = True
    for k, radius_k in zip((1, 2, 3), radii):
        bound = (math.ceil(2 * k) + 1) ** domain.dim
        count = audit.ball_count_table.get(radius_k, 0)
        packing[str(radius_k)] = (count, bound)
        packing_ok = packing_ok and count <= bound

    split = None
    if not connected:
        split = _split(net, domain, graph.components, p2, q2)
        level = logging.ERROR if domain.declared_connected else logging.INFO
        logger.log(level, "D(3r) on the net splits into %d components", len(graph.components))

    return NetReport(
        net_size=size,
        r=radius,
        separation=separation,
        separation_ok=separation_ok,
        covering_radius=covering,
        covering_ok=covering_ok,
        maximal=maximal,
        connectivity_3r_ok=connected,
        packing_ok=packing_ok,
        declared_connected=domain.declared_connected,
        split=split,
        packing_counts=packing,
    )


def _split(net: Net, domain: DomainSample, components, p2: int, q2: int) -> Split:
    position = {label: k for k, label in enumerate(net.labels())}
    first = sorted(components[0], key=position.__getitem__)
    second = sorted((label for c in components[1:] for label in c), key=position.__getitem__)
    grid = net.grid()
    a = grid[[position[label] for label in first]]
    b = grid[[position[label] for label in second]]

    diff = a[:, None, :] - b[None, :, :]
    gap = Length(Fraction(int(np.einsum("ijk,ijk->ij", diff, diff).min())) * domain.resolution**2)
    # X_i: samples within r of A_i
    near_a = _nearest_squares(domain.grid, a) * q2 <= p2
    near_b = _nearest_squares(domain.grid, b) * q2 <= p2
    return Split(first, second, gap, int(near_a.sum()), int(near_b.sum()))
