"""
Finite-dimensional operator certificates: Wannier isometries and their
projections, frames orthonormalized by polar decomposition, and the block shift
realizing the Murray-von Neumann equivalence p + q ~ q along a ray.
"""

import json
import logging
import math
import re
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import scipy.linalg
import scipy.sparse as sp
from django.conf import settings
from pydantic import ValidationError

from .exceptions import ModelError, OperatorRejected
from .lengths import Number, as_fraction
from .schemas import OperatorCertificateSchema, WannierDescription

logger = logging.getLogger(__name__)

_SQRT = re.compile(r"^\s*([+-]?)\s*sqrt\((.+)\)\s*$")


@dataclass(frozen=True)
class Tolerances:
    """Operator tolerances derived from one base value"""

    base: float

    @classmethod
    def default(cls) -> "Tolerances":
        return cls(float(settings.RAYCERT_DEFAULT_TOL))

    @property
    def isometry(self) -> float:
        return self.base

    @property
    def projection(self) -> float:
        return 10 * self.base

    @property
    def frame(self) -> float:
        return 100 * self.base

    @property
    def entry(self) -> float:
        return self.base / 100


@dataclass(frozen=True)
class Amplitude:
    """A real amplitude known through its sign and exact square"""

    sign: int
    square: Fraction

    @classmethod
    def parse(cls, value: Union[Number, str]) -> "Amplitude":
        if isinstance(value, str):
            match = _SQRT.match(value)
            if match:
                square = as_fraction(match.group(2))
                if square < 0:
                    raise ModelError(f"Negative square in amplitude {value!r}")
                return cls(-1 if match.group(1) == "-" else 1, square)
        exact = as_fraction(value)
        return cls((exact > 0) - (exact < 0), exact * exact)

    def __float__(self) -> float:
        return self.sign * math.sqrt(self.square)


class DiscretizedSpace:
    """
    Grid cells with positions and measure weights, and a support per center.

    Each center is itself a cell of its own support. Supports may overlap; only
    the isometry path requires them to be disjoint.
    """

    def __init__(
        self,
        labels: Sequence[str],
        positions: Sequence[Sequence[float]],
        weights: Sequence[Number],
        supports: Dict[str, Sequence[str]],
    ) -> None:
        if len(set(labels)) != len(labels):
            raise ModelError("Cell labels must be unique")
        if not supports:
            raise ModelError("At least one center is needed")
        self.labels = tuple(labels)
        self.positions = np.asarray(positions, dtype=float).reshape(len(labels), -1)
        self.weights = tuple(as_fraction(w) for w in weights)
        if any(w <= 0 for w in self.weights):
            raise ModelError("Cell weights must be positive")

        index = self.index
        self.supports: Dict[str, Tuple[str, ...]] = {}
        for center, cells in supports.items():
            if not cells:
                raise ModelError(f"Center {center} has an empty support")
            unknown = [c for c in cells if c not in index]
            if unknown:
                raise ModelError(f"Support of {center} names unknown cells {unknown}")
            if center not in cells:
                raise ModelError(f"Center {center} does not lie in its support")
            if len(set(cells)) != len(cells):
                raise ModelError(f"Support of {center} repeats a cell")
            self.supports[center] = tuple(cells)

    @cached_property
    def index(self) -> Dict[str, int]:
        return {label: i for i, label in enumerate(self.labels)}

    @property
    def centers(self) -> List[str]:
        return list(self.supports)

    @cached_property
    def distances(self) -> np.ndarray:
        diff = self.positions[:, None, :] - self.positions[None, :, :]
        return np.sqrt(np.einsum("ijk,ijk->ij", diff, diff))

    def overlaps(self) -> List[Tuple[str, str, str]]:
        """(cell, first center, second center) for every shared cell"""
        owner: Dict[str, str] = {}
        shared = []
        for center, cells in self.supports.items():
            for cell in cells:
                if cell in owner:
                    shared.append((cell, owner[cell], center))
                else:
                    owner[cell] = center
        return shared

    def support_diameter(self, center: str) -> float:
        rows = [self.index[c] for c in self.supports[center]]
        return float(self.distances[np.ix_(rows, rows)].max())

    @property
    def max_support_diameter(self) -> float:
        return max(self.support_diameter(c) for c in self.supports)


Amplitudes = Dict[str, Tuple[Amplitude, ...]]


@dataclass(frozen=True)
class WannierInput:
    space: DiscretizedSpace
    amplitudes: Amplitudes
    mode: str = "isometry"
    lambda_min: float = 1e-6


def wannier_from_description(description: WannierDescription) -> WannierInput:
    space = DiscretizedSpace(
        [c.label for c in description.cells],
        [c.position for c in description.cells],
        [c.weight for c in description.cells],
        description.supports,
    )
    amplitudes: Amplitudes = {}
    for center, cells in space.supports.items():
        values = description.amplitudes.get(center)
        if values is None or len(values) != len(cells):
            raise ModelError(f"Center {center} needs one amplitude per support cell")
        amplitudes[center] = tuple(Amplitude.parse(v) for v in values)
    return WannierInput(space, amplitudes, description.mode, description.lambda_min)


def load_wannier(path: Union[str, Path]) -> WannierInput:
    path = Path(path)
    try:
        description = WannierDescription.model_validate(json.loads(path.read_text()))
    except OSError as exc:
        raise ModelError(f"Cannot read operator input {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ModelError(f"Operator input {path} is not valid JSON: {exc}") from exc
    except ValidationError as exc:
        raise ModelError(f"Invalid operator input in {path}: {exc}") from exc
    return wannier_from_description(description)


@dataclass
class OperatorCertificate:
    kind: str
    dims: Dict[str, int]
    residuals: Dict[str, float]
    exact_flags: Dict[str, bool]
    checks: Dict[str, bool]
    propagation: Optional[float] = None
    support_diameter: Optional[float] = None
    boundary_defect_rank: Optional[int] = None
    min_eigenvalue: Optional[float] = None
    matrices: Dict[str, np.ndarray] = field(default_factory=dict, repr=False)

    @property
    def ok(self) -> bool:
        return all(self.checks.values())

    def to_schema(self) -> OperatorCertificateSchema:
        return OperatorCertificateSchema(
            kind=self.kind,
            dims=self.dims,
            residuals=self.residuals,
            exact_flags=self.exact_flags,
            checks=self.checks,
            ok=self.ok,
            propagation=self.propagation,
            support_diameter=self.support_diameter,
            boundary_defect_rank=self.boundary_defect_rank,
            min_eigenvalue=self.min_eigenvalue,
        )


def _norm(matrix: np.ndarray) -> float:
    """Operator (spectral) norm; zero for empty matrices"""
    if matrix.size == 0:
        return 0.0
    return float(np.linalg.norm(matrix, 2))


def synthesis_matrix(space: DiscretizedSpace, amplitudes: Amplitudes) -> np.ndarray:
    """Cells x centers matrix with column x = phi_x in orthonormal cell coordinates"""
    matrix = np.zeros((len(space.labels), len(space.supports)))
    for column, (center, cells) in enumerate(space.supports.items()):
        for cell, value in zip(cells, amplitudes[center]):
            row = space.index[cell]
            matrix[row, column] = float(value) * math.sqrt(space.weights[row])
    return matrix


def _squared_norm(space: DiscretizedSpace, center: str, values: Sequence[Amplitude]) -> Fraction:
    return sum(
        (v.square * space.weights[space.index[cell]] for cell, v in zip(space.supports[center], values)),
        Fraction(0),
    )


def propagation_bound(projection: np.ndarray, space: DiscretizedSpace, entry_tol: float = 0.0) -> float:
    """Largest cell distance carrying an entry above entry_tol in absolute value"""
    mask = np.abs(projection) > entry_tol
    if not mask.any():
        return 0.0
    return float(space.distances[mask].max())


def build_wannier_isometry(
    space: DiscretizedSpace, amplitudes: Amplitudes, tol: Optional[Tolerances] = None
) -> OperatorCertificate:
    """
    Isometry U: l2(centers) -> L2(cells) with U(delta_x) = phi_x

    Args:
        space: Cells and disjoint supports
        amplitudes: Per-center amplitudes aligned with the support cells
        tol: Tolerances; defaults to the configured base tolerance

    Returns:
        Certificate for U*U = I and the projection p = UU*
    """
    tol = tol or Tolerances.default()
    shared = space.overlaps()
    if shared:
        cell, a, b = shared[0]
        raise OperatorRejected(f"Supports of {a} and {b} share cell {cell}; use the frame path")

    squares = {}
    for center in space.supports:
        square = _squared_norm(space, center, amplitudes[center])
        if abs(float(square) - 1.0) > tol.entry:
            raise OperatorRejected(f"Column {center} has squared norm {float(square)!r}, expected 1")
        squares[center] = square
    # Disjoint supports make U*U diagonal, so exact unit columns make it exactly I
    isometry_exact = all(s == 1 for s in squares.values())

    u = synthesis_matrix(space, amplitudes)
    p = u @ u.T
    residuals = {
        "isometry": _norm(u.T @ u - np.eye(u.shape[1])),
        "idempotent": _norm(p @ p - p),
        "self_adjoint": _norm(p - p.T),
    }
    propagation = propagation_bound(p, space)
    diameter = space.max_support_diameter
    checks = {
        "isometry": residuals["isometry"] <= tol.isometry,
        "projection": max(residuals["idempotent"], residuals["self_adjoint"]) <= tol.projection,
        "propagation": propagation <= diameter,
    }
    logger.info("Wannier isometry on %d centers: exact=%s", u.shape[1], isometry_exact)
    return OperatorCertificate(
        kind="wannier-isometry",
        dims={"cells": u.shape[0], "centers": u.shape[1], "rank": int(np.linalg.matrix_rank(p))},
        residuals=residuals,
        exact_flags={"isometry": isometry_exact, "disjoint_supports": True},
        checks=checks,
        propagation=propagation,
        support_diameter=diameter,
        matrices={"U": u, "p": p},
    )


def frame_polar(
    space: DiscretizedSpace,
    amplitudes: Amplitudes,
    lambda_min: float = 1e-6,
    tol: Optional[Tolerances] = None,
) -> OperatorCertificate:
    """
    Orthonormalize a frame V by W = V G^(-1/2) with G = V*V.

    W is cross-checked against scipy's polar factor of V, and WW* against the
    column-space projector of an independent orthonormal basis of range(V).
    """
    tol = tol or Tolerances.default()
    if lambda_min <= 0:
        raise OperatorRejected("lambda_min must be positive")

    v = synthesis_matrix(space, amplitudes)
    gram = v.T @ v
    eigenvalues, eigenvectors = np.linalg.eigh(gram)
    smallest = float(eigenvalues.min())
    if smallest < lambda_min:
        raise OperatorRejected(
            f"Gram matrix is numerically singular: min eigenvalue {smallest:.3e} < {lambda_min:.3e}"
        )

    inverse_root = (eigenvectors / np.sqrt(eigenvalues)) @ eigenvectors.T
    w = v @ inverse_root
    projection = w @ w.T
    unitary, _ = scipy.linalg.polar(v)
    basis = scipy.linalg.orth(v)
    reference = basis @ basis.T

    residuals = {
        "isometry": _norm(w.T @ w - np.eye(w.shape[1])),
        "reference_projector": _norm(projection - reference),
        "polar_factor": _norm(w - unitary),
        "gram_identity": _norm(gram - np.eye(gram.shape[0])),
    }
    propagation = propagation_bound(projection, space, tol.entry)
    diameter = space.max_support_diameter
    checks = {
        "isometry": residuals["isometry"] <= tol.isometry,
        "reference_projector": residuals["reference_projector"] <= tol.frame,
        "polar_factor": residuals["polar_factor"] <= tol.frame,
    }
    logger.info("Frame on %d centers: min eigenvalue %.3e", w.shape[1], smallest)
    return OperatorCertificate(
        kind="frame-polar",
        dims={"cells": v.shape[0], "centers": v.shape[1], "rank": int(basis.shape[1])},
        residuals=residuals,
        exact_flags={
            "disjoint_supports": not space.overlaps(),
            "orthonormal_input": residuals["gram_identity"] == 0.0,
            "propagation_within_two_diameters": propagation <= 2 * diameter,
        },
        checks=checks,
        propagation=propagation,
        support_diameter=diameter,
        min_eigenvalue=smallest,
        matrices={"V": v, "G": gram, "W": w, "WW*": projection},
    )


def partial_sums(k: Sequence[int]) -> List[int]:
    """l_0 = 0 and l_n = k_1 + ... + k_n"""
    sums = [0]
    for value in k:
        sums.append(sums[-1] + value)
    return sums


def _coordinate_projection(ranks: Sequence[int], h_dim: int) -> sp.csr_matrix:
    """Block diagonal of p_r over sites: the first r basis vectors of each copy of H"""
    diagonal = np.zeros(len(ranks) * h_dim, dtype=np.int64)
    for site, rank in enumerate(ranks):
        diagonal[site * h_dim : site * h_dim + rank] = 1
    return _diagonal(diagonal)


def _diagonal(values: np.ndarray) -> sp.csr_matrix:
    matrix = sp.diags(values, format="csr", dtype=np.int64)
    matrix.eliminate_zeros()
    return matrix


def _same(a: sp.spmatrix, b: sp.spmatrix) -> bool:
    return (a != b).nnz == 0


def mvn_shift_witness(k: Sequence[int], h_dim: Optional[int] = None) -> OperatorCertificate:
    """
    Propagation-1 partial isometry T from (P + Q) to Q along sites 1..n_max

    P = diag(p_{k_n}) and Q = diag(p_{l_n}). Target site n receives the Q-block
    of site n-1 on its first l_{n-1} vectors and the P-block of site n on the
    next k_n. The Q-block of the last site has nowhere to go, so T*T misses it.

    Args:
        k: Ranks k_1..k_n_max, each a nonnegative integer
        h_dim: Dimension of the fiber H, at least l_n_max; defaults to l_n_max

    Returns:
        Certificate with exact integer checks and the boundary defect rank
    """
    n_max = len(k)
    if n_max < 3:
        raise OperatorRejected(f"At least 3 sites are needed, got {n_max}")
    if any(int(value) != value or value < 0 for value in k):
        raise OperatorRejected("Ranks k_n must be nonnegative integers")
    k = [int(value) for value in k]
    sums = partial_sums(k)
    total = sums[-1]
    h_dim = max(total, 1) if h_dim is None else h_dim
    if h_dim < max(total, 1):
        raise OperatorRejected(f"H_dim={h_dim} is below l(n_max)={total}")

    size = n_max * h_dim
    rows: List[int] = []
    cols: List[int] = []
    for site in range(n_max):
        base = site * h_dim
        # P-copy of this site onto [l_{n-1}, l_n) of the same site
        for b in range(k[site]):
            rows.append(base + sums[site] + b)
            cols.append(base + b)
        # Q-copy of this site onto [0, l_n) of the next site
        if site + 1 < n_max:
            for a in range(sums[site + 1]):
                rows.append(base + h_dim + a)
                cols.append(size + base + a)
    t = sp.csr_matrix(
        (np.ones(len(rows), dtype=np.int64), (rows, cols)), shape=(size, 2 * size), dtype=np.int64
    )

    p = _coordinate_projection(k, h_dim)
    q = _coordinate_projection(sums[1:], h_dim)
    source = sp.block_diag((p, q), format="csr", dtype=np.int64)
    defect_diagonal = np.zeros(2 * size, dtype=np.int64)
    last_q = size + (n_max - 1) * h_dim
    defect_diagonal[last_q : last_q + total] = 1
    defect = _diagonal(defect_diagonal)

    tt_star = (t @ t.T).tocsr()
    t_star_t = (t.T @ t).tocsr()
    range_exact = _same(tt_star, q)
    interior_exact = _same(source - t_star_t, defect)
    partial_isometry = _same(tt_star @ t, t)
    defect_rank = int(defect.nnz)

    rank_p, rank_q = int(p.nnz), int(q.nnz)
    rank_t_star_t, rank_tt_star = int(t_star_t.diagonal().sum()), int(tt_star.diagonal().sum())
    bookkeeping = (
        rank_t_star_t == rank_tt_star == rank_q == rank_p + rank_q - defect_rank
        and defect_rank == total
    )
    coo = t.tocoo()
    propagation = int(np.abs(coo.row // h_dim - (coo.col % size) // h_dim).max()) if coo.nnz else 0

    logger.info("MvN shift on %d sites: defect rank %d", n_max, defect_rank)
    matrices = {}
    if size <= 512:
        matrices = {"T": t.toarray(), "P": p.toarray(), "Q": q.toarray()}
    return OperatorCertificate(
        kind="mvn-shift",
        dims={
            "sites": n_max,
            "h_dim": h_dim,
            "target": size,
            "source": 2 * size,
            "rank_P": rank_p,
            "rank_Q": rank_q,
            "rank_T*T": rank_t_star_t,
            "rank_TT*": rank_tt_star,
        },
        residuals={
            "range": float((tt_star - q).count_nonzero()),
            "source_interior": float((source - t_star_t - defect).count_nonzero()),
            "partial_isometry": float((tt_star @ t - t).count_nonzero()),
        },
        exact_flags={"integer_arithmetic": True},
        checks={
            "TT*=Q": range_exact,
            "T*T=P+Q_interior": interior_exact,
            "TT*T=T": partial_isometry,
            "rank_bookkeeping": bookkeeping,
            "propagation_at_most_1": propagation <= 1,
        },
        propagation=float(propagation),
        boundary_defect_rank=defect_rank,
        matrices=matrices,
    )


def random_ranks(seed: int, n_max: int, k_max: int) -> List[int]:
    rng = np.random.default_rng(seed)
    return [int(x) for x in rng.integers(0, k_max + 1, size=n_max)]


def dump_matrices(certificate: OperatorCertificate, directory: Union[str, Path]) -> List[Path]:
    """Write each stored matrix as dense row-major text, one row per line"""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    written = []
    for name, matrix in certificate.matrices.items():
        safe = re.sub(r"[^A-Za-z0-9]+", "_", name).strip("_") or "matrix"
        path = directory / f"{certificate.kind}_{safe}.txt"
        fmt = "%d" if np.issubdtype(matrix.dtype, np.integer) else "%.17g"
        np.savetxt(path, matrix, fmt=fmt)
        written.append(path)
    return written
