"""FastAPI service exposing the simulator.

Endpoint handlers are plain functions over pydantic models, so the CLI can
invoke them in-process while remote clients go through HTTP. Domain errors
map to 400 responses carrying a machine-parsable ``error_code``.
"""

from __future__ import annotations

from fastapi import FastAPI, Request
from fastapi.responses import JSONResponse

from .. import __version__
from ..danger import DangerPmf, compute_metrics
from ..environment import generate_synthetic
from ..errors import HazardNavError, InputError
from ..likelihood import k_fold_mean_likelihood
from ..mission import MissionConfig, Termination, run_mission
from ..montecarlo import ExperimentConfig, run_experiment
from ..sensing import GroundTruthMode, SensingModality
from . import schemas as s

app = FastAPI(title="hazardnav", version=__version__)


@app.exception_handler(HazardNavError)
async def _domain_error(request: Request, exc: HazardNavError):
    return JSONResponse(
        status_code=400,
        content=s.ErrorModel(error_code=exc.code, message=str(exc)).model_dump(),
    )


@app.get("/healthz")
def healthz() -> dict:
    return {"status": "ok", "version": __version__}


def _matrices(vision: s.MatrixModel | None, language: s.MatrixModel | None):
    l_v = vision.to_core() if vision is not None else None
    l_l = language.to_core() if language is not None else None
    if l_v is not None and l_v.modality != "vision":
        raise InputError("the 'vision' matrix must be tagged vision", code="E_MATRIX_INVALID")
    if l_l is not None and l_l.modality != "language":
        raise InputError("the 'language' matrix must be tagged language", code="E_MATRIX_INVALID")
    return l_v, l_l


@app.post("/simulate", response_model=s.SimulateResponse)
def simulate(req: s.SimulateRequest) -> s.SimulateResponse:
    """Run a (modality x tolerance) Monte Carlo grid on an environment."""
    env = req.environment.to_graph()
    cfg = req.config
    config = ExperimentConfig(
        runs=cfg.runs,
        taus=tuple(cfg.taus),
        modalities=tuple(SensingModality.parse(m) for m in cfg.modalities),
        gt_mode=GroundTruthMode.parse(cfg.gt_mode),
        termination=Termination.parse(cfg.termination),
        step_cap=cfg.step_cap,
        master_seed=cfg.master_seed,
    )
    l_v, l_l = _matrices(req.vision, req.language)
    results = run_experiment(
        env, config, l_v, l_l, workers=req.workers, keep_outcomes=req.include_per_run
    )
    return s.SimulateResponse(
        master_seed=cfg.master_seed,
        cells=[s.CellModel.from_core(c) for c in results.cells],
        warnings=list(results.warnings),
        per_run=[
            s.RunRowModel(
                modality=label,
                tau=tau,
                run=run,
                success=outcome.success,
                exposures=outcome.exposures,
                steps=outcome.steps,
            )
            for label, tau, run, outcome in results.per_run
        ],
    )


@app.post("/plan", response_model=s.PlanResponse)
def plan(req: s.PlanRequest) -> s.PlanResponse:
    """Run one traced mission and return its step-by-step record."""
    env = req.environment.to_graph()
    config = MissionConfig(
        tau=req.tau,
        modality=SensingModality.parse(req.modality),
        gt_mode=GroundTruthMode.parse(req.gt_mode),
        termination=Termination.parse(req.termination),
        step_cap=req.step_cap,
        seed=req.seed,
    )
    l_v, l_l = _matrices(req.vision, req.language)
    outcome, trace = run_mission(env, config, l_v, l_l, collect_trace=True)
    return s.PlanResponse(
        tau=req.tau,
        modality=config.modality.label,
        seed=req.seed,
        outcome=s.OutcomeModel.from_core(outcome),
        steps=[s.StepModel.from_core(step) for step in trace],
    )


@app.post("/estimate-likelihood", response_model=s.EstimateResponse)
def estimate_likelihood_endpoint(req: s.EstimateRequest) -> s.EstimateResponse:
    """K-fold mean likelihood matrix from prediction records."""
    records = req.to_core()
    matrix = k_fold_mean_likelihood(
        records, req.modality, req.folds, smoothing=req.smoothing, seed=req.seed
    )
    return s.EstimateResponse(
        matrix=s.MatrixModel.from_core(matrix), folds=req.folds, records=len(records)
    )


@app.post("/eval-metrics", response_model=s.MetricsResponse)
def eval_metrics(req: s.MetricsRequest) -> s.MetricsResponse:
    """Top-1 / RMSE / off-by-1 over prediction records."""
    records = req.to_core()
    if not records:
        raise InputError("no prediction records supplied", code="E_RECORDS_EMPTY")
    metrics = compute_metrics(records)
    return s.MetricsResponse(
        top1=metrics.top1,
        rmse=metrics.rmse,
        off_by_1=metrics.off_by_1,
        records=len(records),
    )


@app.post("/gen-env", response_model=s.GenEnvResponse)
def gen_env(req: s.GenEnvRequest) -> s.GenEnvResponse:
    """Generate a region-structured synthetic environment."""
    if req.regions is None:
        regions = [
            (0.5, DangerPmf((1.0, 0.0, 0.0, 0.0, 0.0))),
            (0.3, DangerPmf((0.15, 0.5, 0.3, 0.05, 0.0))),
            (0.2, DangerPmf((0.0, 0.0, 0.05, 0.25, 0.7))),
        ]
    else:
        regions = [(r.fraction, DangerPmf(tuple(r.truth))) for r in req.regions]
    graph = generate_synthetic(
        req.nodes, req.connectivity, regions, exits=req.exits, seed=req.seed
    )
    return s.GenEnvResponse(environment=s.EnvironmentModel.from_graph(graph))
