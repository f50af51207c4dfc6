"""
Coarse-equivalence constants between two discrete subsets and transfer of
finite-component certificates from one to the other.

If every point of D1 lies within C of D2 and vice versa, a finite component of
D1(alpha + 2C) with margin above alpha + 2C gives a set Z of D2 points that is
separated from the rest of D2 by more than alpha. The components of Z in
D2(alpha) are then finite components of D2 at scale alpha.
"""

import logging
from dataclasses import dataclass
from typing import List, Optional, Sequence

from .exceptions import ContractViolation, ModelError, TransferRefused
from .lengths import ZERO, Length
from .rips_multiscale import (
    ComponentCertificate,
    Status,
    build_rips,
    certify_members,
    classify_components,
)
from .schemas import TransferSchema
from .space_models import Box, Point, PointModel, Region, Window, enumerate_window, isolation_margin

logger = logging.getLogger(__name__)

# Nearest-point search doubles its radius at most this many times
_MAX_DOUBLINGS = 40


def nearest_distance(model: PointModel, point: Point) -> Length:
    """
    Exact distance from a position to the nearest point of the full model.

    A box of half-width h around the point holds every model point within h,
    so once a candidate within h turns up the minimum over the box is exact.
    """
    reach = Length.of(1)
    for _ in range(_MAX_DOUBLINGS):
        box = Box.around([point.position], reach)
        best: Optional[Length] = None
        for other in model.points_in_box(box):
            d = model.distance(point, other)
            if best is None or d < best:
                best = d
        if best is not None and best <= reach:
            return best
        reach = reach.scaled(2)
    raise ModelError(f"No point of {model.name} near {point.label}")


@dataclass(frozen=True)
class CoarsePair:
    first: PointModel
    second: PointModel
    constant: Length
    window_constant: Length
    declared_constant: Optional[Length] = None


def _directed_radius(source: Window, target: PointModel) -> Length:
    radius = ZERO
    for point in source:
        radius = max(radius, nearest_distance(target, point))
    return radius


def coarse_constant(first: PointModel, second: PointModel, region: Region) -> CoarsePair:
    """
    Mutual covering constant of two models over a window.

    Both directed covering radii are measured against the full other model.
    A declared global bound between the models is taken when it is larger.
    """
    if first.dim != second.dim:
        raise ModelError(f"Models of dimension {first.dim} and {second.dim} share no ambient space")
    windows = [enumerate_window(first, region), enumerate_window(second, region)]
    for model, window in zip((first, second), windows):
        if not len(window):
            raise ContractViolation(f"Model {model.name} has no points in the window {region}")

    window_constant = max(
        _directed_radius(windows[0], second),
        _directed_radius(windows[1], first),
    )
    declared = first.coarse_bound_to(second) or second.coarse_bound_to(first)
    constant = window_constant if declared is None else max(window_constant, declared)
    logger.info(
        "Coarse constant %s -> %s: %s (window %s, declared %s)",
        first.name,
        second.name,
        constant,
        window_constant,
        declared,
    )
    return CoarsePair(first, second, constant, window_constant, declared)


def source_scale(pair: CoarsePair, alpha: Length) -> Length:
    return alpha + pair.constant.scaled(2)


def transfer_finite_component(
    source: ComponentCertificate, pair: CoarsePair, alpha: Length
) -> List[ComponentCertificate]:
    """
    Carry a finite component of the first model over to the second

    Args:
        source: CertifiedFinite component of the first model at scale alpha + 2C
        pair: The coarse pair and its constant C
        alpha: Target scale in the second model

    Returns:
        CertifiedFinite certificates for the components of Z in D2(alpha)
    """
    if source.status is not Status.CERTIFIED_FINITE:
        raise TransferRefused(f"Component {source.component_id} is not certified finite")
    needed = source_scale(pair, alpha)
    if source.alpha < needed:
        raise TransferRefused(f"Source scale {source.alpha} is below alpha + 2C = {needed}")

    first, second = pair.first, pair.second
    members = [first.resolve(label) for label in source.members]
    margin, exact = isolation_margin(first, members, source.alpha)
    # An inexact margin is a strict lower bound above the horizon
    if margin is not None and exact and not margin > source.alpha:
        raise TransferRefused(
            f"Source component {source.component_id} has margin {margin}, not above {source.alpha}"
        )

    # Z: points of D2 within C of the source; the covering constant is attained, so closed
    reach = pair.constant
    box = Box.around((p.position for p in members), reach)
    zone = [
        z
        for z in second.points_in_box(box)
        if any(second.distance(z, x) <= reach for x in members)
    ]
    if not zone:
        raise ContractViolation(
            f"No point of {second.name} within {reach} of component {source.component_id}"
        )
    zone.sort(key=second.sort_key)

    zone_margin, zone_exact = isolation_margin(second, zone, alpha)
    if zone_margin is not None and zone_exact and not zone_margin > alpha:
        raise TransferRefused(f"Transferred set is within {zone_margin} of the rest at alpha={alpha}")

    window = Window(Box.around(p.position for p in zone), tuple(zone))
    graph = build_rips(window, alpha, second)
    certificates = [
        certify_members(second, i, members_z, window, alpha)
        for i, members_z in enumerate(graph.components)
    ]
    for cert in certificates:
        if cert.status is not Status.CERTIFIED_FINITE:
            raise TransferRefused(f"Transferred component {list(cert.members)} did not certify finite")
    logger.debug(
        "Transferred component %d (%d points) to %d components",
        source.component_id,
        len(members),
        len(certificates),
    )
    return certificates


@dataclass(frozen=True)
class Transfer:
    pair: CoarsePair
    alpha: Length
    source_scale: Length
    sources: Sequence[ComponentCertificate]
    certificates: Sequence[ComponentCertificate]

    def to_schema(self) -> TransferSchema:
        declared = self.pair.declared_constant
        return TransferSchema(
            constant=float(self.pair.constant),
            window_constant=float(self.pair.window_constant),
            declared_constant=None if declared is None else float(declared),
            alpha=float(self.alpha),
            source_scale=float(self.source_scale),
            sources=[c.to_schema() for c in self.sources],
            certificates=[c.to_schema() for c in self.certificates],
        )


def transfer_all(pair: CoarsePair, region: Region, alpha: Length) -> Transfer:
    """Classify the first model at alpha + 2C and transfer every finite component"""
    if alpha <= ZERO:
        raise ModelError("alpha must be positive")
    scale = source_scale(pair, alpha)
    window = enumerate_window(pair.first, region)
    graph = build_rips(window, scale, pair.first)
    sources = [
        cert
        for cert in classify_components(pair.first, graph, window)
        if cert.status is Status.CERTIFIED_FINITE
    ]

    certificates: List[ComponentCertificate] = []
    for source in sources:
        for cert in transfer_finite_component(source, pair, alpha):
            certificates.append(
                ComponentCertificate(
                    len(certificates),
                    cert.alpha,
                    cert.members,
                    cert.status,
                    margin=cert.margin,
                    margin_exact=cert.margin_exact,
                    rule=cert.rule,
                )
            )
    if not sources:
        logger.info("No finite source component of %s at scale %s", pair.first.name, scale)
    return Transfer(pair, alpha, scale, tuple(sources), tuple(certificates))


