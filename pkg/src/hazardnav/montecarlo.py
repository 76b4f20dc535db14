"""Batched mission experiments over (modality x tolerance) grids.

Every run's seed is derived from (master seed, modality label, tolerance,
run index) with SHA-256, so a cell's results never depend on which other
cells are in the grid, on execution order, or on the worker count.
"""

from __future__ import annotations

import hashlib
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from io import StringIO
from typing import Sequence

from .environment import EnvironmentGraph
from .errors import InputError
from .likelihood import LikelihoodMatrix
from .mission import MissionConfig, MissionOutcome, Termination, run_mission
from .sensing import GroundTruthMode, SensingModality
from .danger import validate_level

RESULTS_HEADER = (
    "modality,tau,runs,success_rate,success_ci95,avg_exposures,avg_path_length"
)
PER_RUN_HEADER = "modality,tau,run,success,exposures,steps"


@dataclass(frozen=True)
class ExperimentConfig:
    runs: int
    taus: tuple[int, ...] = (1, 2, 3, 4)
    modalities: tuple[SensingModality, ...] = ()
    gt_mode: GroundTruthMode = GroundTruthMode.RESAMPLE_PER_EVENT
    termination: Termination = Termination.FAIL_FAST
    step_cap: int | None = None
    master_seed: int = 0

    def __post_init__(self):
        if self.runs < 1:
            raise InputError(f"runs must be >= 1, got {self.runs}")
        if not self.taus:
            raise InputError("need at least one tolerance level")
        for tau in self.taus:
            validate_level(tau, "tolerance")
        if not self.modalities:
            raise InputError("need at least one modality")
        if self.step_cap is not None and self.step_cap < 1:
            raise InputError(f"step cap must be >= 1, got {self.step_cap}")


@dataclass(frozen=True)
class CellResult:
    modality: str
    tau: int
    runs: int
    success_rate: float  # percent
    success_ci95: float  # percent half-width, normal approximation
    avg_exposures: float
    avg_path_length: float


@dataclass(frozen=True)
class ExperimentResults:
    cells: tuple[CellResult, ...]
    warnings: tuple[str, ...] = ()
    per_run: tuple[tuple[str, int, int, MissionOutcome], ...] = ()

    def cell(self, modality_label: str, tau: int) -> CellResult:
        for c in self.cells:
            if c.modality == modality_label and c.tau == tau:
                return c
        raise KeyError(f"no cell ({modality_label!r}, {tau})")


def derive_run_seed(master_seed: int, modality_label: str, tau: int, run: int) -> int:
    """Stable 64-bit per-run seed; cell-local by construction."""
    digest = hashlib.sha256(
        f"{master_seed}|{modality_label}|{tau}|{run}".encode()
    ).digest()
    return int.from_bytes(digest[:8], "big")


def aggregate(outcomes: Sequence[MissionOutcome]) -> tuple[float, float, float, float]:
    """(success %, 95% CI half-width %, mean exposures, mean steps)."""
    if not outcomes:
        raise InputError("cannot aggregate zero outcomes")
    n = len(outcomes)
    p = sum(1 for o in outcomes if o.success) / n
    ci = 1.96 * (p * (1.0 - p) / n) ** 0.5
    return (
        100.0 * p,
        100.0 * ci,
        sum(o.exposures for o in outcomes) / n,
        sum(o.steps for o in outcomes) / n,
    )


def _run_cell(args) -> tuple[str, int, CellResult, tuple[MissionOutcome, ...]]:
    env, config, l_v, l_l, modality, tau, keep_outcomes = args
    label = modality.label
    outcomes = []
    for run in range(config.runs):
        mission = MissionConfig(
            tau=tau,
            modality=modality,
            gt_mode=config.gt_mode,
            termination=config.termination,
            step_cap=config.step_cap,
            seed=derive_run_seed(config.master_seed, label, tau, run),
        )
        outcome, _ = run_mission(env, mission, l_v, l_l)
        outcomes.append(outcome)
    rate, ci, exposures, length = aggregate(outcomes)
    cell = CellResult(label, tau, config.runs, rate, ci, exposures, length)
    return label, tau, cell, tuple(outcomes) if keep_outcomes else ()


def run_experiment(
    env: EnvironmentGraph,
    config: ExperimentConfig,
    l_v: LikelihoodMatrix | None = None,
    l_l: LikelihoodMatrix | None = None,
    workers: int = 1,
    keep_outcomes: bool = False,
) -> ExperimentResults:
    """Run the full grid; cells are independent so they parallelize freely.

    Results are identical for any ``workers`` value.
    """
    for modality in config.modalities:
        if modality.uses_vision and (l_v is None or l_v.modality != "vision"):
            raise InputError(
                f"modality {modality.label} needs a vision likelihood matrix",
                code="E_MATRIX_MISSING",
            )
        if modality.uses_language and (l_l is None or l_l.modality != "language"):
            raise InputError(
                f"modality {modality.label} needs a language likelihood matrix",
                code="E_MATRIX_MISSING",
            )
    warnings = []
    if any(tau == 5 for tau in config.taus):
        warnings.append(
            "tau=5 cells included: the team tolerates even extreme danger, "
            "so every reachable mission succeeds"
        )
    tasks = [
        (env, config, l_v, l_l, modality, tau, keep_outcomes)
        for modality in config.modalities
        for tau in config.taus
    ]
    if workers <= 1 or len(tasks) == 1:
        finished = [_run_cell(t) for t in tasks]
    else:
        with ProcessPoolExecutor(max_workers=min(workers, len(tasks))) as pool:
            finished = list(pool.map(_run_cell, tasks))
    cells = []
    per_run = []
    for label, tau, cell, outcomes in finished:
        cells.append(cell)
        for run, outcome in enumerate(outcomes):
            per_run.append((label, tau, run, outcome))
    return ExperimentResults(tuple(cells), tuple(warnings), tuple(per_run))


def results_to_csv(results: ExperimentResults) -> str:
    """Stable CSV rendering: grid order, rates and averages to 2 decimals."""
    out = StringIO()
    out.write(RESULTS_HEADER + "\n")
    for c in results.cells:
        out.write(
            f"{c.modality},{c.tau},{c.runs},{c.success_rate:.2f},"
            f"{c.success_ci95:.2f},{c.avg_exposures:.2f},{c.avg_path_length:.2f}\n"
        )
    return out.getvalue()


def per_run_to_csv(results: ExperimentResults) -> str:
    out = StringIO()
    out.write(PER_RUN_HEADER + "\n")
    for label, tau, run, outcome in results.per_run:
        out.write(
            f"{label},{tau},{run},{int(outcome.success)},"
            f"{outcome.exposures},{outcome.steps}\n"
        )
    return out.getvalue()
