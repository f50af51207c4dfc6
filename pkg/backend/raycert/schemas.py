from ninja import Schema
from pydantic import Field, field_validator, model_validator
from typing import Any, List, Literal, Optional, Union

# Numbers in descriptions may be JSON numbers or exact decimal/rational strings
Coordinate = Union[int, float, str]
LengthValue = Union[float, Literal["inf"]]


class BoxSchema(Schema):
    lower: List[Coordinate]
    upper: List[Coordinate]

    @model_validator(mode="after")
    def check_dimensions(self):
        if len(self.lower) != len(self.upper):
            raise ValueError("Box bounds must have the same dimension")
        return self


class BallSchema(Schema):
    center: str
    radius: Coordinate


class WindowSchema(Schema):
    box: Optional[BoxSchema] = None
    ball: Optional[BallSchema] = None

    @model_validator(mode="after")
    def check_one_region(self):
        if (self.box is None) == (self.ball is None):
            raise ValueError("A window is either a box or a ball")
        return self


class LabelledPointSchema(Schema):
    label: str
    position: List[Coordinate]


class GapRuleSchema(Schema):
    kind: Literal["linear", "exponential", "constant", "capped"] = "linear"
    slope: Coordinate = 1
    offset: Coordinate = 1
    base: Coordinate = 2
    value: Coordinate = 1
    cap: Coordinate = 1
    inner: Optional["GapRuleSchema"] = None


class ModelDescription(Schema):
    kind: Literal[
        "finite_cloud",
        "lattice",
        "lattice_with_defects",
        "cluster_sequence",
        "wedge_of_rays",
        "translated",
    ]
    dim: int = Field(ge=1)
    name: Optional[str] = None
    params: dict[str, Any] = {}
    declared_separation: Optional[Coordinate] = None
    declared_ball_bounds: dict[str, int] = {}
    window: Optional[WindowSchema] = None


class DomainDescription(Schema):
    shape: Literal["box", "disk", "annulus", "boxes"]
    resolution: Coordinate
    bounds: List[List[Coordinate]] = []
    boxes: List[List[List[Coordinate]]] = []
    center: List[Coordinate] = []
    radius: Optional[Coordinate] = None
    inner_radius: Optional[Coordinate] = None


class WannierCellSchema(Schema):
    label: str
    position: List[float]
    weight: float = 1.0


class WannierDescription(Schema):
    cells: List[WannierCellSchema]
    supports: dict[str, List[str]]
    amplitudes: dict[str, List[Coordinate]]
    mode: Literal["isometry", "frame"] = "isometry"
    lambda_min: float = 1e-6


class RunConfig(Schema):
    subcommand: str
    models: List[str] = []
    alpha: Optional[float] = None
    alpha_max: Optional[float] = None
    window: Optional[str] = None
    out: Optional[str] = None
    tol: float
    seed: int = 0
    threads: int = 1

    @field_validator("tol")
    @classmethod
    def tolerance_positive(cls, value: float) -> float:
        if not value > 0:
            raise ValueError("Tolerances must be positive")
        return value

    @field_validator("alpha", "alpha_max")
    @classmethod
    def scale_positive(cls, value: Optional[float]) -> Optional[float]:
        if value is not None and not value > 0:
            raise ValueError("Scales must be positive")
        return value

    @field_validator("threads")
    @classmethod
    def threads_positive(cls, value: int) -> int:
        if value < 1:
            raise ValueError("At least one thread is required")
        return value


class ErrorSchema(Schema):
    error: str
    message: str


class AuditSchema(Schema):
    window_size: int
    separation: LengthValue
    separation_exact: str
    ball_count_table: dict[str, int]
    declared_bounds_ok: bool
    violations: List[str] = []


class CertificateSchema(Schema):
    component_id: int
    alpha: float
    members: List[str]
    status: Literal["certified_finite", "certified_infinite", "unknown"]
    margin: Optional[LengthValue] = None
    margin_exact: bool = False
    rule: Optional[str] = None


class ScaleWitnessSchema(Schema):
    alpha: float
    components: List[CertificateSchema]


class VerdictSchema(Schema):
    outcome: Literal["satisfied", "fails", "inconclusive"]
    alpha_star: Optional[float] = None
    scales_examined: List[float]
    witnesses: List[ScaleWitnessSchema] = []
    unknown_scales: List[float] = []
    rule: Optional[str] = None


class BMEntrySchema(Schema):
    alpha: float
    finite_components: List[List[str]]
    class_nonzero: bool
    inconclusive: bool


class BMLimitSchema(Schema):
    verdict: Literal["vanishes", "persists", "inconclusive"]
    alpha_star: Optional[float] = None


class BMReportSchema(Schema):
    entries: List[BMEntrySchema]
    limit: BMLimitSchema


class TransferSchema(Schema):
    constant: float
    window_constant: float
    declared_constant: Optional[float] = None
    alpha: float
    source_scale: float
    sources: List[CertificateSchema]
    certificates: List[CertificateSchema]


class AnalyzeReportSchema(Schema):
    model: str
    window_size: int
    criterion: VerdictSchema
    borel_moore: BMReportSchema
    coarse_transfer: Optional[TransferSchema] = None


class ContinuationSchema(Schema):
    kind: Literal["lattice-direction", "wedge-ray", "cluster-sweep"]
    anchor: str
    axis: Optional[int] = None
    sign: Optional[int] = None


class RaySchema(Schema):
    id: int
    prefix: List[str]
    continuation: Optional[ContinuationSchema] = None


class CloneSchema(Schema):
    label: str
    original: str


class WitnessSchema(Schema):
    lipschitz_C: float
    rays: List[RaySchema]
    clones: List[CloneSchema] = []
    metric_convention: str = "clones-colocated"


class CheckSchema(Schema):
    name: str
    passed: bool
    counterexample: Optional[str] = None


class ValidationReportSchema(Schema):
    ok: bool
    checks: List[CheckSchema]


class RefusalSchema(Schema):
    refused: bool = True
    reason: str
    criterion: Optional[VerdictSchema] = None


class SplitSchema(Schema):
    first: List[str]
    second: List[str]
    gap: LengthValue
    first_region_size: int
    second_region_size: int


class NetReportSchema(Schema):
    net_size: int
    r: float
    separation_ok: bool
    separation: LengthValue
    covering_radius: LengthValue
    covering_ok: bool
    maximal: bool
    connectivity_3r_ok: bool
    packing_ok: bool
    declared_connected: bool
    split: Optional[SplitSchema] = None


class NetOutputSchema(Schema):
    model: ModelDescription
    report: NetReportSchema


class OperatorCertificateSchema(Schema):
    kind: Literal["wannier-isometry", "frame-polar", "mvn-shift"]
    dims: dict[str, int]
    residuals: dict[str, float]
    exact_flags: dict[str, bool]
    checks: dict[str, bool]
    ok: bool
    propagation: Optional[float] = None
    support_diameter: Optional[float] = None
    boundary_defect_rank: Optional[int] = None
    min_eigenvalue: Optional[float] = None


GapRuleSchema.model_rebuild()
