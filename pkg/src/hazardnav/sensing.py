"""Simulated observation generation for the mission loop.

An observation of a node first draws a conditioning danger level (either the
node's fixed per-mission latent level or a fresh draw from its truth PMF),
then emits vision/word prediction labels from the matching likelihood-matrix
columns. All randomness flows through the caller's ``random.Random``.
"""

from __future__ import annotations

import random
from dataclasses import dataclass
from enum import Enum

from .danger import DangerPmf, validate_level
from .errors import InputError
from .fusion import ObservationEvent
from .likelihood import LikelihoodMatrix

NO_SENSOR = "no-sensor"
VISION_ONLY = "vision"
LANGUAGE_ONLY = "language"
VISION_LANGUAGE = "vision-language"
FULL_KNOWLEDGE = "full-knowledge"

_KINDS = (NO_SENSOR, VISION_ONLY, LANGUAGE_ONLY, VISION_LANGUAGE, FULL_KNOWLEDGE)


class GroundTruthMode(Enum):
    """How a node's danger is realized when sensed or traversed."""

    RESAMPLE_PER_EVENT = "resample"
    FIXED_LATENT = "fixed-latent"

    @classmethod
    def parse(cls, text: str) -> "GroundTruthMode":
        for mode in cls:
            if mode.value == text.strip().lower():
                return mode
        raise InputError(
            f"unknown ground-truth mode {text!r}; expected one of "
            f"{[m.value for m in cls]}"
        )


@dataclass(frozen=True)
class SensingModality:
    """Sensor configuration: which label streams exist and how many words."""

    kind: str
    words: int = 0

    def __post_init__(self):
        if self.kind not in _KINDS:
            raise InputError(f"unknown modality kind {self.kind!r}")
        needs_words = self.kind in (LANGUAGE_ONLY, VISION_LANGUAGE)
        if needs_words and self.words < 1:
            raise InputError(f"{self.kind} modality needs words >= 1, got {self.words}")
        if not needs_words and self.words != 0:
            raise InputError(f"{self.kind} modality takes no word count")

    # -- constructors ---------------------------------------------------

    @classmethod
    def no_sensor(cls) -> "SensingModality":
        return cls(NO_SENSOR)

    @classmethod
    def vision_only(cls) -> "SensingModality":
        return cls(VISION_ONLY)

    @classmethod
    def language_only(cls, words: int = 1) -> "SensingModality":
        return cls(LANGUAGE_ONLY, words)

    @classmethod
    def vision_language(cls, words: int = 1) -> "SensingModality":
        return cls(VISION_LANGUAGE, words)

    @classmethod
    def full_knowledge(cls) -> "SensingModality":
        return cls(FULL_KNOWLEDGE)

    # -- properties -------------------------------------------------------

    @property
    def uses_vision(self) -> bool:
        return self.kind in (VISION_ONLY, VISION_LANGUAGE)

    @property
    def uses_language(self) -> bool:
        return self.kind in (LANGUAGE_ONLY, VISION_LANGUAGE)

    @property
    def observes(self) -> bool:
        return self.uses_vision or self.uses_language

    @property
    def label(self) -> str:
        if self.kind == LANGUAGE_ONLY:
            return f"language-{self.words}"
        if self.kind == VISION_LANGUAGE:
            return f"vl-{self.words}"
        return self.kind

    @classmethod
    def parse(cls, text: str) -> "SensingModality":
        """Parse labels like ``no-sensor``, ``vision``, ``language-1``,
        ``vl-10``, ``full-knowledge``."""
        raw = text.strip().lower()
        if raw in (NO_SENSOR, "none"):
            return cls.no_sensor()
        if raw in (VISION_ONLY, "vision-only"):
            return cls.vision_only()
        if raw in (FULL_KNOWLEDGE, "full"):
            return cls.full_knowledge()
        for prefix, factory in (
            ("language", cls.language_only),
            ("vl", cls.vision_language),
        ):
            if raw == prefix:
                return factory(1)
            if raw.startswith(prefix + "-"):
                try:
                    return factory(int(raw[len(prefix) + 1 :]))
                except ValueError:
                    break
        raise InputError(f"unknown modality {text!r}")


def sample_level(pmf: DangerPmf, rng: random.Random) -> int:
    """Inverse-CDF draw of a danger level from a PMF."""
    u = rng.random()
    total = 0.0
    for i, p in enumerate(pmf.probs):
        total += p
        if u < total:
            return i + 1
    return 5


def observe_node(
    node_truth: DangerPmf,
    modality: SensingModality,
    l_v: LikelihoodMatrix | None,
    l_l: LikelihoodMatrix | None,
    gt_mode: GroundTruthMode,
    latent: int | None,
    rng: random.Random,
    node: int | None = None,
) -> ObservationEvent:
    """Generate one observation event for a node.

    The conditioning level, the vision label, and the word labels are drawn
    in that order so event generation is reproducible under a fixed rng.
    """
    if not modality.observes:
        return ObservationEvent(node)
    if gt_mode is GroundTruthMode.FIXED_LATENT:
        if latent is None:
            raise InputError("fixed-latent observation requires the node's latent level")
        level = validate_level(latent, "latent level")
    else:
        level = sample_level(node_truth, rng)
    vision = None
    if modality.uses_vision:
        if l_v is None or l_v.modality != "vision":
            raise InputError("modality needs a vision-tagged likelihood matrix")
        vision = l_v.sample_prediction(level, rng)
    words: tuple[int, ...] = ()
    if modality.uses_language:
        if l_l is None or l_l.modality != "language":
            raise InputError("modality needs a language-tagged likelihood matrix")
        words = tuple(l_l.sample_prediction(level, rng) for _ in range(modality.words))
    return ObservationEvent(node, vision, words)
