"""Single escape-mission execution.

Each step the team observes the current node and its out-neighbors, fuses
the labels into its belief map, replans the maximum-survival route, and moves
one arc. Arriving at a node whose sampled danger exceeds the tolerance is an
intolerable exposure: fatal under ``FAIL_FAST``, counted under
``COUNT_EXPOSURES``. The mission ends on reaching an exit, on a fatal
exposure, or at the step cap.
"""

from __future__ import annotations

import math
import random
from bisect import bisect_right
from dataclasses import dataclass
from enum import Enum

from .danger import NUM_LEVELS, validate_level
from .environment import EnvironmentGraph
from .errors import DegenerateEvidenceError, InputError
from .fusion import ObservationEvent
from .likelihood import LikelihoodMatrix
from .planner import SURVIVAL_FLOOR, BeliefMap, PlannedPath, _min_weight_route, safest_path
from .sensing import GroundTruthMode, SensingModality

STEP_CAP_FACTOR = 10  # default cap: 10 moves per node in the graph


class Termination(Enum):
    FAIL_FAST = "fail-fast"
    COUNT_EXPOSURES = "count-exposures"

    @classmethod
    def parse(cls, text: str) -> "Termination":
        for rule in cls:
            if rule.value == text.strip().lower():
                return rule
        raise InputError(
            f"unknown termination rule {text!r}; expected one of {[r.value for r in cls]}"
        )


@dataclass(frozen=True)
class MissionConfig:
    tau: int
    modality: SensingModality
    gt_mode: GroundTruthMode = GroundTruthMode.RESAMPLE_PER_EVENT
    termination: Termination = Termination.FAIL_FAST
    step_cap: int | None = None
    seed: int = 0
    # Freeze a node's posterior after its first observation instead of
    # chaining updates on revisits (guards the independence assumption).
    refuse_duplicate_observations: bool = False

    def __post_init__(self):
        validate_level(self.tau, "tolerance")
        if self.step_cap is not None and self.step_cap < 1:
            raise InputError(f"step cap must be >= 1, got {self.step_cap}")


@dataclass(frozen=True)
class MissionOutcome:
    success: bool
    path: tuple[int, ...]
    exposures: int
    steps: int
    failure: str | None = None  # "exposure" | "no-route" | "step-cap"


@dataclass(frozen=True)
class MissionStep:
    """One trace row: what was observed, believed, planned, and rolled."""

    position: int
    events: tuple[ObservationEvent, ...]
    beliefs: dict[int, tuple[float, ...]]
    planned: PlannedPath
    moved_to: int
    sampled_danger: int
    exposure: bool

    def to_json_dict(self) -> dict:
        return {
            "position": self.position,
            "events": [
                {"node": e.node, "vision": e.vision, "words": list(e.words)}
                for e in self.events
            ],
            "beliefs": {str(k): list(v) for k, v in self.beliefs.items()},
            "planned": {
                "nodes": list(self.planned.nodes),
                "survival": self.planned.survival_estimate,
            },
            "moved_to": self.moved_to,
            "sampled_danger": self.sampled_danger,
            "exposure": self.exposure,
        }


def full_knowledge_reference(env: EnvironmentGraph, tau: int) -> PlannedPath:
    """Best route when the whole ground-truth danger map is known.

    No information arrives during such a mission, so this single plan is what
    a full-knowledge mission follows end to end.
    """
    return safest_path(env, BeliefMap.from_ground_truth(env), tau)


def _sample_cum(cum: tuple[float, ...], rng: random.Random) -> int:
    idx = bisect_right(cum, rng.random())
    return min(idx, NUM_LEVELS - 1) + 1


def run_mission(
    env: EnvironmentGraph,
    config: MissionConfig,
    l_v: LikelihoodMatrix | None = None,
    l_l: LikelihoodMatrix | None = None,
    collect_trace: bool = False,
) -> tuple[MissionOutcome, tuple[MissionStep, ...]]:
    """Execute one mission; deterministic given (env, config, matrices).

    Unexplored nodes hold the uniform prior (ground truth under
    full-knowledge). Observation covers the current node plus out-neighbors
    each step, chaining posterior updates on revisits unless
    ``refuse_duplicate_observations`` is set.
    """
    modality = config.modality
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

    n = env.node_count
    adjacency = env.adjacency
    order = env.order
    exit_set = frozenset(env.index[e] for e in env.exits)
    start = env.index[env.start]
    tau = config.tau
    step_cap = config.step_cap if config.step_cap is not None else STEP_CAP_FACTOR * n
    fail_fast = config.termination is Termination.FAIL_FAST
    rng = random.Random(config.seed)
    truth_cum = env.truth_cumulative

    full = modality.kind == "full-knowledge"
    if full:
        post = [list(env.nodes[node_id].truth.probs) for node_id in order]
    else:
        post = [[0.2] * NUM_LEVELS for _ in range(n)]
    surv = [min(1.0, sum(p[:tau])) for p in post]
    weight = [-math.log(max(s, SURVIVAL_FLOOR)) for s in surv]

    latent: list[int] | None = None
    if config.gt_mode is GroundTruthMode.FIXED_LATENT:
        latent = [_sample_cum(truth_cum[i], rng) for i in range(n)]

    vis_cum = l_v._col_cum if l_v is not None else None
    lang_cum = l_l._col_cum if l_l is not None else None
    uses_vision = modality.uses_vision
    word_count = modality.words if modality.uses_language else 0
    observes = modality.observes
    refuse_dup = config.refuse_duplicate_observations
    observed = bytearray(n)

    trace: list[MissionStep] = []
    path_ids = [order[start]]
    cur = start
    exposures = 0
    steps = 0
    success = False
    failure: str | None = None
    plan: tuple[int, ...] | None = None
    dirty = True

    if cur in exit_set:
        return MissionOutcome(True, tuple(path_ids), 0, 0), ()

    while True:
        events: list[ObservationEvent] = []
        touched: dict[int, tuple[float, ...]] = {}
        if observes:
            for v in (cur,) + adjacency[cur]:
                if refuse_dup and observed[v]:
                    continue
                observed[v] = 1
                level = latent[v] if latent is not None else _sample_cum(truth_cum[v], rng)
                vision = None
                words: tuple[int, ...] = ()
                if uses_vision:
                    vision = min(bisect_right(vis_cum[level - 1], rng.random()), 4) + 1
                if word_count:
                    words = tuple(
                        min(bisect_right(lang_cum[level - 1], rng.random()), 4) + 1
                        for _ in range(word_count)
                    )
                p = post[v]
                if vision is not None:
                    row = l_v.rows[vision - 1]
                    for d in range(NUM_LEVELS):
                        p[d] *= row[d]
                for w in words:
                    row = l_l.rows[w - 1]
                    for d in range(NUM_LEVELS):
                        p[d] *= row[d]
                total = p[0] + p[1] + p[2] + p[3] + p[4]
                if total <= 0.0:
                    raise DegenerateEvidenceError(
                        f"node {order[v]}: all danger levels ruled out; "
                        "use a smoothed likelihood matrix"
                    )
                for d in range(NUM_LEVELS):
                    p[d] /= total
                s = min(1.0, sum(p[:tau]))
                surv[v] = s
                weight[v] = -math.log(s) if s > SURVIVAL_FLOOR else -math.log(SURVIVAL_FLOOR)
                dirty = True
                if collect_trace:
                    events.append(ObservationEvent(order[v], vision, words))
                    touched[order[v]] = tuple(p)

        if dirty or plan is None or len(plan) < 2:
            plan = _min_weight_route(adjacency, weight, cur, exit_set)
            dirty = False
            if plan is None:
                failure = "no-route"
                break

        nxt = plan[1]
        steps += 1
        path_ids.append(order[nxt])
        level = latent[nxt] if latent is not None else _sample_cum(truth_cum[nxt], rng)
        exposed = level > tau

        if collect_trace:
            est = 1.0
            for node in plan[1:]:
                est *= surv[node]
            trace.append(
                MissionStep(
                    position=order[cur],
                    events=tuple(events),
                    beliefs=touched,
                    planned=PlannedPath(tuple(order[i] for i in plan), est),
                    moved_to=order[nxt],
                    sampled_danger=level,
                    exposure=exposed,
                )
            )

        if exposed:
            exposures += 1
            if fail_fast:
                failure = "exposure"
                break
        if nxt in exit_set:
            success = True
            break
        if steps >= step_cap:
            failure = "step-cap"
            break
        cur = nxt
        plan = plan[1:]

    outcome = MissionOutcome(success, tuple(path_ids), exposures, steps, failure)
    return outcome, tuple(trace)
