"""hazardnav: danger estimation and survival-maximizing escape planning.

Core pieces: danger PMFs over a 5-level scale, likelihood matrices for
vision/language danger classifiers, Bayesian fusion of their predictions,
a survival-probability route planner over location graphs, a receding-horizon
mission executor, and a Monte Carlo experiment harness. A FastAPI service
(``hazardnav.service``) wraps the library; the CLI (``hazardnav.cli``) is a
thin client of that service.
"""

from .danger import (
    ClassifierMetrics,
    DangerPmf,
    PredictionRecord,
    AnnotationRecord,
    compute_metrics,
    mode_danger,
    validate_level,
)
from .environment import EnvironmentGraph, generate_synthetic, load_environment, save_environment, school54
from .errors import (
    DegenerateEvidenceError,
    GraphValidationError,
    HazardNavError,
    InputError,
    PlanningError,
)
from .fusion import DangerPosterior, ObservationEvent, apply_event, fuse, map_estimate, simulate_fused_metrics
from .likelihood import (
    LikelihoodMatrix,
    estimate_likelihood,
    k_fold_mean_likelihood,
    load_matrix,
    mean_likelihood,
    save_matrix,
    synth_likelihood,
)
from .mission import (
    MissionConfig,
    MissionOutcome,
    MissionStep,
    Termination,
    full_knowledge_reference,
    run_mission,
)
from .montecarlo import (
    CellResult,
    ExperimentConfig,
    ExperimentResults,
    aggregate,
    derive_run_seed,
    results_to_csv,
    run_experiment,
)
from .planner import (
    BeliefMap,
    PlannedPath,
    brute_force_safest_path,
    edge_survival,
    path_survival,
    safest_path,
)
from .sensing import GroundTruthMode, SensingModality, observe_node, sample_level

__version__ = "0.1.0"
