"""Bayesian fusion of discrete vision/language danger predictions.

A posterior over the five danger levels is updated by multiplying the prior
with the likelihood of each prediction (predictions are conditionally
independent given the true danger) and renormalizing.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from typing import Sequence

from .danger import (
    NUM_LEVELS,
    ClassifierMetrics,
    DangerPmf,
    PredictionRecord,
    compute_metrics,
    validate_level,
)
from .errors import DegenerateEvidenceError, InputError
from .likelihood import LikelihoodMatrix


@dataclass(frozen=True)
class ObservationEvent:
    """One sensing event at a node: an optional vision label plus zero or
    more human word labels."""

    node: int | None = None
    vision: int | None = None
    words: tuple[int, ...] = ()

    def __post_init__(self):
        if self.vision is not None:
            validate_level(self.vision, "vision label")
        for w in self.words:
            validate_level(w, "word label")

    @property
    def is_empty(self) -> bool:
        return self.vision is None and not self.words


@dataclass(frozen=True)
class DangerPosterior:
    """A node's current danger belief plus the number of updates applied."""

    pmf: DangerPmf
    update_count: int = 0


def _fused_weights(
    prior: Sequence[float],
    event: ObservationEvent,
    l_v: LikelihoodMatrix | None,
    l_l: LikelihoodMatrix | None,
) -> list[float]:
    """Unnormalized posterior: prior times the likelihood row of each label."""
    out = list(prior)
    if event.vision is not None:
        row = l_v.rows[event.vision - 1]
        for d in range(NUM_LEVELS):
            out[d] *= row[d]
    if event.words:
        for w in event.words:
            row = l_l.rows[w - 1]
            for d in range(NUM_LEVELS):
                out[d] *= row[d]
    return out


def fuse(
    prior: DangerPmf,
    event: ObservationEvent,
    l_v: LikelihoodMatrix | None = None,
    l_l: LikelihoodMatrix | None = None,
) -> DangerPmf:
    """Posterior over danger given one observation event.

    An empty event returns the prior unchanged. Raises
    ``DegenerateEvidenceError`` when the unnormalized posterior is all zero,
    which can only happen with unsmoothed likelihood matrices.
    """
    if event.is_empty:
        return prior
    if event.vision is not None:
        if l_v is None or l_v.modality != "vision":
            raise InputError("vision observation requires a vision-tagged matrix")
    if event.words:
        if l_l is None or l_l.modality != "language":
            raise InputError("word observations require a language-tagged matrix")
    weights = _fused_weights(prior.probs, event, l_v, l_l)
    total = sum(weights)
    if total <= 0.0:
        raise DegenerateEvidenceError(
            f"all danger levels have zero posterior mass for event {event}"
        )
    return DangerPmf(tuple(w / total for w in weights))


def apply_event(
    posterior: DangerPosterior,
    event: ObservationEvent,
    l_v: LikelihoodMatrix | None = None,
    l_l: LikelihoodMatrix | None = None,
) -> DangerPosterior:
    """Chain one event onto a stored posterior, tracking the update count.

    The current posterior serves as the prior for the next observation of
    the same node; empty events leave it untouched.
    """
    if event.is_empty:
        return posterior
    return DangerPosterior(fuse(posterior.pmf, event, l_v, l_l), posterior.update_count + 1)


def map_estimate(posterior: DangerPmf) -> int:
    """Argmax level of the posterior; ties go to the higher level."""
    best = 1
    best_p = posterior.probs[0]
    for d in range(1, NUM_LEVELS):
        if posterior.probs[d] >= best_p:
            best, best_p = d + 1, posterior.probs[d]
    return best


def simulate_fused_metrics(
    true_levels: Sequence[int],
    l_v: LikelihoodMatrix,
    l_l: LikelihoodMatrix,
    words: int = 0,
    seed: int = 0,
) -> ClassifierMetrics:
    """Score MAP-after-fusion against the truth on simulated observations.

    For each item, a vision label and ``words`` word labels are drawn from
    the matrix columns of the true level, fused against a uniform prior, and
    the MAP estimate is compared with the truth.
    """
    if words < 0:
        raise InputError(f"word count must be non-negative, got {words}")
    if not true_levels:
        raise InputError("need at least one item to simulate")
    rng = random.Random(seed)
    prior = DangerPmf.uniform()
    records = []
    for true_level in true_levels:
        validate_level(true_level, "true level")
        vision = l_v.sample_prediction(true_level, rng)
        word_labels = tuple(l_l.sample_prediction(true_level, rng) for _ in range(words))
        posterior = fuse(prior, ObservationEvent(None, vision, word_labels), l_v, l_l)
        records.append(PredictionRecord(true_level, map_estimate(posterior)))
    return compute_metrics(records)
