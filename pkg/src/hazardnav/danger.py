"""Danger scale, danger PMFs, annotation/prediction records, and classifier metrics.

Danger levels are plain ints on the 1..5 scale (1 low, 2 moderate, 3 high,
4 very high, 5 extreme). ``validate_level`` enforces the range at every
construction boundary, so downstream code can treat levels as trusted ints.
"""

from __future__ import annotations

import csv
import math
from collections import Counter
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

from .errors import InputError

LEVELS = (1, 2, 3, 4, 5)
NUM_LEVELS = 5

# Sum-to-one tolerance for PMF validation.
PMF_TOL = 1e-9


def validate_level(value: int, what: str = "danger level") -> int:
    if not isinstance(value, int) or isinstance(value, bool) or not 1 <= value <= 5:
        raise InputError(f"{what} must be an integer in 1..5, got {value!r}")
    return value


@dataclass(frozen=True)
class DangerPmf:
    """Probability mass over the five danger levels.

    Entry ``probs[d-1]`` is the probability of level ``d``. Entries must be
    non-negative and sum to 1 within ``PMF_TOL``.
    """

    probs: tuple[float, float, float, float, float]

    def __post_init__(self):
        if len(self.probs) != NUM_LEVELS:
            raise InputError(f"PMF needs {NUM_LEVELS} entries, got {len(self.probs)}")
        if any(p < 0.0 for p in self.probs):
            raise InputError(f"PMF entries must be non-negative: {self.probs}")
        total = sum(self.probs)
        if abs(total - 1.0) > PMF_TOL:
            raise InputError(f"PMF entries must sum to 1 (got {total!r})")

    @classmethod
    def uniform(cls) -> "DangerPmf":
        return cls((0.2, 0.2, 0.2, 0.2, 0.2))

    @classmethod
    def delta(cls, level: int) -> "DangerPmf":
        validate_level(level)
        p = [0.0] * NUM_LEVELS
        p[level - 1] = 1.0
        return cls(tuple(p))

    @classmethod
    def from_ratings(cls, ratings: Sequence[int]) -> "DangerPmf":
        """Empirical PMF of a non-empty multiset of ratings."""
        if not ratings:
            raise InputError("cannot build a PMF from an empty ratings list")
        counts = [0] * NUM_LEVELS
        for r in ratings:
            counts[validate_level(r, "rating") - 1] += 1
        n = len(ratings)
        return cls(tuple(c / n for c in counts))

    @classmethod
    def from_weights(cls, weights: Sequence[float]) -> "DangerPmf":
        """Normalize a non-negative 5-vector into a PMF."""
        total = sum(weights)
        if total <= 0.0:
            raise InputError("weights must have positive total mass")
        return cls(tuple(w / total for w in weights))

    def probability(self, level: int) -> float:
        validate_level(level)
        return self.probs[level - 1]

    def cdf(self, tau: int) -> float:
        """P(level <= tau), the inclusive lower tail."""
        validate_level(tau, "tolerance")
        return sum(self.probs[:tau])

    def expected_level(self) -> float:
        return sum(d * p for d, p in zip(LEVELS, self.probs))


def mode_danger(ratings: Sequence[int]) -> int:
    """Most frequent rating; ties go to the higher (more dangerous) level."""
    if not ratings:
        raise InputError("cannot take the mode of an empty ratings list")
    counts = Counter(validate_level(r, "rating") for r in ratings)
    best = 0
    best_count = 0
    for level in LEVELS:
        c = counts.get(level, 0)
        if c >= best_count and c > 0:
            best, best_count = level, c
    return best


@dataclass(frozen=True)
class PredictionRecord:
    """One classifier output paired with the item's ground-truth mode level."""

    true_level: int
    predicted: int

    def __post_init__(self):
        validate_level(self.true_level, "true level")
        validate_level(self.predicted, "predicted level")


@dataclass(frozen=True)
class AnnotationRecord:
    """Raw ratings (and keywords) collected for one item."""

    item_id: str
    ratings: tuple[int, ...]
    keywords: tuple[str, ...] = ()

    def __post_init__(self):
        if not self.ratings:
            raise InputError(f"annotation {self.item_id!r} has no ratings")
        for r in self.ratings:
            validate_level(r, "rating")


@dataclass(frozen=True)
class ClassifierMetrics:
    """Top-1 accuracy (%), RMSE (danger units), off-by-1 accuracy (%)."""

    top1: float
    rmse: float
    off_by_1: float

    def __post_init__(self):
        if not 0.0 <= self.top1 <= self.off_by_1 <= 100.0:
            raise InputError(
                f"need 0 <= top1 <= off_by_1 <= 100, got {self.top1}, {self.off_by_1}"
            )
        if self.rmse < 0.0:
            raise InputError(f"rmse must be non-negative, got {self.rmse}")


def compute_metrics(records: Sequence[PredictionRecord]) -> ClassifierMetrics:
    """Score predictions against true levels.

    RMSE uses 1/n normalization over all records; off-by-1 counts predictions
    within one danger unit of the truth (so a top-1 hit always counts).
    """
    if not records:
        raise InputError("cannot compute metrics over zero records")
    n = len(records)
    hits = 0
    near = 0
    sq = 0.0
    for rec in records:
        diff = rec.predicted - rec.true_level
        if diff == 0:
            hits += 1
        if -1 <= diff <= 1:
            near += 1
        sq += diff * diff
    return ClassifierMetrics(
        top1=100.0 * hits / n,
        rmse=math.sqrt(sq / n),
        off_by_1=100.0 * near / n,
    )


# ---------------------------------------------------------------------------
# File formats
# ---------------------------------------------------------------------------

def load_prediction_records(path: str | Path) -> list[PredictionRecord]:
    """Read a `true,predicted` CSV into records."""
    records = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None or [h.strip() for h in header[:2]] != ["true", "predicted"]:
            raise InputError(
                f"{path}: expected header 'true,predicted', got {header!r}",
                code="E_RECORDS_INVALID",
            )
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not cell.strip() for cell in row):
                continue
            try:
                true_level, predicted = int(row[0]), int(row[1])
            except (ValueError, IndexError):
                raise InputError(
                    f"{path}:{lineno}: expected two integer columns, got {row!r}",
                    code="E_RECORDS_INVALID",
                )
            records.append(PredictionRecord(true_level, predicted))
    if not records:
        raise InputError(f"{path}: no prediction records", code="E_RECORDS_EMPTY")
    return records


def save_prediction_records(records: Iterable[PredictionRecord], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["true", "predicted"])
        for rec in records:
            writer.writerow([rec.true_level, rec.predicted])


def load_annotation_records(path: str | Path) -> list[AnnotationRecord]:
    """Read an `item_id,ratings,keywords` CSV; ratings are `;`-separated ints."""
    records = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        expected = ["item_id", "ratings", "keywords"]
        if header is None or [h.strip() for h in header[:3]] != expected:
            raise InputError(
                f"{path}: expected header 'item_id,ratings,keywords', got {header!r}",
                code="E_RECORDS_INVALID",
            )
        for lineno, row in enumerate(reader, start=2):
            if not row or all(not cell.strip() for cell in row):
                continue
            try:
                ratings = tuple(int(r) for r in row[1].split(";") if r.strip())
                keywords = tuple(k for k in row[2].split(";") if k) if len(row) > 2 else ()
                records.append(AnnotationRecord(row[0], ratings, keywords))
            except (ValueError, IndexError, InputError) as exc:
                raise InputError(
                    f"{path}:{lineno}: bad annotation row: {exc}",
                    code="E_RECORDS_INVALID",
                )
    return records


def save_annotation_records(records: Iterable[AnnotationRecord], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["item_id", "ratings", "keywords"])
        for rec in records:
            writer.writerow(
                [rec.item_id, ";".join(map(str, rec.ratings)), ";".join(rec.keywords)]
            )
