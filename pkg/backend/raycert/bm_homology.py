"""
Borel-Moore H_0 status of the all-ones chain c on D(alpha).

On a locally finite graph [c] vanishes exactly on infinite components (a ray
telescopes it away) and survives on finite ones, so the class is tracked per
component certificate. The boundary matrix and its integer rank are kept as a
small-instance oracle.
"""

import logging
from dataclasses import dataclass
from enum import Enum
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from .exceptions import ContractViolation
from .lengths import Length
from .rips_multiscale import (
    ComponentCertificate,
    MergeTree,
    ScaleGraph,
    Status,
    merge_tree,
    scan_scales,
)
from .schemas import BMEntrySchema, BMLimitSchema, BMReportSchema
from .space_models import PointModel, Window

logger = logging.getLogger(__name__)

Edge = Tuple[str, str]


@dataclass(frozen=True)
class BMEntry:
    alpha: Length
    finite_components: Tuple[Tuple[str, ...], ...]
    class_nonzero: bool
    inconclusive: bool

    def to_schema(self) -> BMEntrySchema:
        return BMEntrySchema(
            alpha=float(self.alpha),
            finite_components=[list(c) for c in self.finite_components],
            class_nonzero=self.class_nonzero,
            inconclusive=self.inconclusive,
        )


class LimitVerdict(str, Enum):
    VANISHES = "vanishes"
    PERSISTS = "persists"
    INCONCLUSIVE = "inconclusive"


@dataclass(frozen=True)
class BMLimit:
    verdict: LimitVerdict
    alpha_star: Optional[Length] = None

    def to_schema(self) -> BMLimitSchema:
        return BMLimitSchema(
            verdict=self.verdict.value,
            alpha_star=None if self.alpha_star is None else float(self.alpha_star),
        )


@dataclass(frozen=True)
class BMReport:
    entries: Tuple[BMEntry, ...]
    limit: BMLimit

    def to_schema(self) -> BMReportSchema:
        return BMReportSchema(
            entries=[e.to_schema() for e in self.entries],
            limit=self.limit.to_schema(),
        )


def bm_class_per_scale(graph: ScaleGraph, certs: Sequence[ComponentCertificate]) -> BMEntry:
    """[c] at one scale: nonzero iff some component is CertifiedFinite"""
    covered = sorted(tuple(sorted(c.members)) for c in certs)
    expected = sorted(tuple(sorted(members)) for members in graph.components)
    if covered != expected:
        raise ContractViolation(f"Certificates do not cover the components of D({graph.alpha})")

    finite = tuple(c.members for c in certs if c.status is Status.CERTIFIED_FINITE)
    return BMEntry(
        alpha=graph.alpha,
        finite_components=finite,
        class_nonzero=bool(finite),
        inconclusive=any(c.status is Status.UNKNOWN for c in certs),
    )


def bm_limit(tree: MergeTree, entries: Sequence[BMEntry]) -> BMLimit:
    """
    Direct-limit verdict over the scales of the tree

    The limit vanishes at the least scale whose class is definitely zero and
    where no component beyond the window is left uncertified; earlier scales
    do not matter. It persists only when the model proves
    finite components at every scale.
    """
    if [e.alpha for e in entries] != tree.scales:
        raise ContractViolation("BM entries must cover exactly the tree scales")
    for entry in entries:
        if not entry.class_nonzero and not entry.inconclusive and entry.alpha not in tree.beyond_window:
            return BMLimit(LimitVerdict.VANISHES, entry.alpha)
    if tree.persistence_rule is not None:
        return BMLimit(LimitVerdict.PERSISTS)
    return BMLimit(LimitVerdict.INCONCLUSIVE)


def report_from_tree(tree: MergeTree) -> BMReport:
    entries = tuple(
        bm_class_per_scale(graph, certs) for graph, certs in zip(tree.levels, tree.certificates)
    )
    limit = bm_limit(tree, entries)
    logger.info("Borel-Moore limit: %s", limit.verdict.value)
    return BMReport(entries, limit)


def bm_report(model: PointModel, window: Window, alpha_max: Length, threads: int = 1) -> BMReport:
    if not len(window):
        raise ContractViolation("The window holds no points")
    tree = merge_tree(model, window, scan_scales(model, window, alpha_max), threads)
    return report_from_tree(tree)


def bounding_chain(ray: Sequence[str]) -> Dict[Edge, int]:
    """
    Telescoping 1-chain b = sum_k (k+1) [x_k -> x_{k+1}] along a ray prefix.

    Its boundary is -c on the prefix except at the last listed vertex, where
    the truncated tail would carry the rest of the telescope.
    """
    return {(a, b): k + 1 for k, (a, b) in enumerate(zip(ray, ray[1:]))}


def boundary_of(chain: Dict[Edge, int]) -> Dict[str, int]:
    """Boundary of a 1-chain: [x -> y] maps to y - x"""
    result: Dict[str, int] = {}
    for (a, b), coefficient in chain.items():
        result[b] = result.get(b, 0) + coefficient
        result[a] = result.get(a, 0) - coefficient
    return {vertex: c for vertex, c in result.items() if c}


def boundary_matrix(graph: ScaleGraph) -> np.ndarray:
    """Vertex-by-edge incidence matrix of the boundary map C_1 -> C_0"""
    index = {label: i for i, label in enumerate(graph.labels)}
    matrix = np.zeros((len(graph.labels), len(graph.edges)), dtype=np.int64)
    for column, (a, b) in enumerate(graph.edges):
        matrix[index[a], column] = -1
        matrix[index[b], column] = 1
    return matrix


def integer_rank(matrix: np.ndarray) -> int:
    """Exact rank by fraction-free (Bareiss) elimination over Python integers"""
    rows: List[List[int]] = [[int(x) for x in row] for row in matrix.tolist()]
    if not rows or not rows[0]:
        return 0
    n_rows, n_cols = len(rows), len(rows[0])
    rank, previous = 0, 1
    for col in range(n_cols):
        pivot = next((r for r in range(rank, n_rows) if rows[r][col] != 0), None)
        if pivot is None:
            continue
        rows[rank], rows[pivot] = rows[pivot], rows[rank]
        head = rows[rank][col]
        for r in range(rank + 1, n_rows):
            factor = rows[r][col]
            rows[r] = [
                (head * rows[r][c] - factor * rows[rank][c]) // previous for c in range(n_cols)
            ]
        previous = head
        rank += 1
        if rank == n_rows:
            break
    return rank


def h0_rank(graph: ScaleGraph) -> int:
    """Rank of H_0 of a finite graph: vertices minus the rank of the boundary map"""
    return len(graph.labels) - integer_rank(boundary_matrix(graph))
