"""Request/response models for the HTTP service.

These mirror the on-disk JSON formats exactly, so the CLI can pass parsed
files straight through. Conversion helpers translate between the wire models
and the core library types.
"""

from __future__ import annotations

from typing import Literal, Optional

from pydantic import BaseModel, Field

from ..danger import PredictionRecord
from ..environment import EnvironmentGraph, environment_from_dict, environment_to_dict
from ..likelihood import LikelihoodMatrix, matrix_from_dict
from ..mission import MissionOutcome, MissionStep
from ..montecarlo import CellResult

DEFAULT_MASTER_SEED = 12345
DEFAULT_MODALITIES = (
    "no-sensor",
    "vision",
    "language-1",
    "vl-1",
    "vl-5",
    "vl-10",
    "full-knowledge",
)


class ErrorModel(BaseModel):
    error_code: str
    message: str


class MatrixModel(BaseModel):
    modality: Literal["vision", "language"]
    l: list[list[float]]

    def to_core(self) -> LikelihoodMatrix:
        return matrix_from_dict(self.model_dump())

    @classmethod
    def from_core(cls, matrix: LikelihoodMatrix) -> "MatrixModel":
        return cls(modality=matrix.modality, l=[list(r) for r in matrix.rows])


class NodeModel(BaseModel):
    id: int
    truth: list[float]
    label: Optional[str] = None


class EnvironmentModel(BaseModel):
    undirected: bool = False
    nodes: list[NodeModel]
    arcs: list[tuple[int, int]]
    start: int
    exits: list[int]

    def to_graph(self) -> EnvironmentGraph:
        return environment_from_dict(self.model_dump(exclude_none=True))

    @classmethod
    def from_graph(cls, graph: EnvironmentGraph) -> "EnvironmentModel":
        return cls.model_validate(environment_to_dict(graph))


class ExperimentSettings(BaseModel):
    """Mirrors the experiment/mission config file accepted by the CLI."""

    runs: int = 1000
    taus: list[int] = Field(default_factory=lambda: [1, 2, 3, 4])
    modalities: list[str] = Field(default_factory=lambda: list(DEFAULT_MODALITIES))
    gt_mode: str = "resample"
    termination: str = "fail-fast"
    step_cap: Optional[int] = None
    master_seed: int = DEFAULT_MASTER_SEED


class SimulateRequest(BaseModel):
    environment: EnvironmentModel
    config: ExperimentSettings = Field(default_factory=ExperimentSettings)
    vision: Optional[MatrixModel] = None
    language: Optional[MatrixModel] = None
    workers: int = 1
    include_per_run: bool = False


class CellModel(BaseModel):
    modality: str
    tau: int
    runs: int
    success_rate: float
    success_ci95: float
    avg_exposures: float
    avg_path_length: float

    def to_core(self) -> CellResult:
        return CellResult(**self.model_dump())

    @classmethod
    def from_core(cls, cell: CellResult) -> "CellModel":
        return cls(
            modality=cell.modality,
            tau=cell.tau,
            runs=cell.runs,
            success_rate=cell.success_rate,
            success_ci95=cell.success_ci95,
            avg_exposures=cell.avg_exposures,
            avg_path_length=cell.avg_path_length,
        )


class RunRowModel(BaseModel):
    modality: str
    tau: int
    run: int
    success: bool
    exposures: int
    steps: int


class SimulateResponse(BaseModel):
    master_seed: int
    cells: list[CellModel]
    warnings: list[str] = Field(default_factory=list)
    per_run: list[RunRowModel] = Field(default_factory=list)


class OutcomeModel(BaseModel):
    success: bool
    path: list[int]
    exposures: int
    steps: int
    failure: Optional[str] = None

    @classmethod
    def from_core(cls, outcome: MissionOutcome) -> "OutcomeModel":
        return cls(
            success=outcome.success,
            path=list(outcome.path),
            exposures=outcome.exposures,
            steps=outcome.steps,
            failure=outcome.failure,
        )


class EventModel(BaseModel):
    node: Optional[int]
    vision: Optional[int] = None
    words: list[int] = Field(default_factory=list)


class PlannedPathModel(BaseModel):
    nodes: list[int]
    survival: float


class StepModel(BaseModel):
    position: int
    events: list[EventModel]
    beliefs: dict[str, list[float]]
    planned: PlannedPathModel
    moved_to: int
    sampled_danger: int
    exposure: bool

    @classmethod
    def from_core(cls, step: MissionStep) -> "StepModel":
        return cls.model_validate(step.to_json_dict())


class PlanRequest(BaseModel):
    environment: EnvironmentModel
    tau: int
    modality: str = "vision"
    seed: int = DEFAULT_MASTER_SEED
    gt_mode: str = "resample"
    termination: str = "fail-fast"
    step_cap: Optional[int] = None
    vision: Optional[MatrixModel] = None
    language: Optional[MatrixModel] = None


class PlanResponse(BaseModel):
    tau: int
    modality: str
    seed: int
    outcome: OutcomeModel
    steps: list[StepModel]


class RecordsPayload(BaseModel):
    """Prediction records as (true, predicted) pairs."""

    records: list[tuple[int, int]]

    def to_core(self) -> list[PredictionRecord]:
        return [PredictionRecord(t, p) for t, p in self.records]


class EstimateRequest(RecordsPayload):
    folds: int = 9
    smoothing: float = 0.0
    seed: int = 0
    modality: Literal["vision", "language"] = "vision"


class EstimateResponse(BaseModel):
    matrix: MatrixModel
    folds: int
    records: int


class MetricsRequest(RecordsPayload):
    pass


class MetricsResponse(BaseModel):
    top1: float
    rmse: float
    off_by_1: float
    records: int


class RegionModel(BaseModel):
    fraction: float
    truth: list[float]


class GenEnvRequest(BaseModel):
    nodes: int
    connectivity: float = 2.5
    regions: Optional[list[RegionModel]] = None
    exits: int = 2
    seed: int = 0


class GenEnvResponse(BaseModel):
    environment: EnvironmentModel
