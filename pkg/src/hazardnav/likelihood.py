"""Sensing-likelihood matrices: estimation from labeled records, K-fold
averaging, synthetic construction, and the JSON file format.

A likelihood matrix stores ``l[i][j] = p(predicted level i | true level j)``
for one sensing modality, so every column is a distribution over predictions.
"""

from __future__ import annotations

import json
import math
import random
from bisect import bisect_right
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from .danger import NUM_LEVELS, PMF_TOL, PredictionRecord, validate_level
from .errors import InputError

VISION = "vision"
LANGUAGE = "language"
MODALITIES = (VISION, LANGUAGE)

Row = tuple[float, float, float, float, float]


@dataclass(frozen=True)
class LikelihoodMatrix:
    """Column-stochastic 5x5 table of p(prediction | true level).

    ``rows`` is indexed rows-first by prediction, columns by true level
    (both 0-based internally; the level-based accessors are 1-based).
    """

    rows: tuple[Row, Row, Row, Row, Row]
    modality: str
    # Per-column cumulative sums, precomputed for fast label sampling.
    _col_cum: tuple[Row, ...] = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        if self.modality not in MODALITIES:
            raise InputError(f"unknown modality tag {self.modality!r}")
        if len(self.rows) != NUM_LEVELS or any(len(r) != NUM_LEVELS for r in self.rows):
            raise InputError("likelihood matrix must be 5x5")
        cum = []
        for j in range(NUM_LEVELS):
            total = 0.0
            col_cum = []
            for i in range(NUM_LEVELS):
                v = self.rows[i][j]
                if v < 0.0:
                    raise InputError(f"negative likelihood entry at ({i + 1},{j + 1})")
                total += v
                col_cum.append(total)
            if abs(total - 1.0) > PMF_TOL:
                raise InputError(
                    f"column {j + 1} must sum to 1 (got {total!r}); "
                    "each column is a distribution over predictions"
                )
            cum.append(tuple(col_cum))
        object.__setattr__(self, "_col_cum", tuple(cum))

    @classmethod
    def identity(cls, modality: str) -> "LikelihoodMatrix":
        rows = tuple(
            tuple(1.0 if i == j else 0.0 for j in range(NUM_LEVELS))
            for i in range(NUM_LEVELS)
        )
        return cls(rows, modality)

    @classmethod
    def uniform(cls, modality: str) -> "LikelihoodMatrix":
        rows = tuple((0.2,) * NUM_LEVELS for _ in range(NUM_LEVELS))
        return cls(rows, modality)

    def prob(self, predicted: int, true_level: int) -> float:
        """p(prediction = predicted | true level)."""
        validate_level(predicted, "predicted level")
        validate_level(true_level, "true level")
        return self.rows[predicted - 1][true_level - 1]

    def row(self, predicted: int) -> Row:
        """Likelihood of one prediction across all true levels."""
        validate_level(predicted, "predicted level")
        return self.rows[predicted - 1]

    def column(self, true_level: int) -> Row:
        """Prediction distribution for one true level."""
        validate_level(true_level, "true level")
        j = true_level - 1
        return tuple(self.rows[i][j] for i in range(NUM_LEVELS))

    def sample_prediction(self, true_level: int, rng: random.Random) -> int:
        """Draw a predicted level from the column of ``true_level``."""
        validate_level(true_level, "true level")
        cum = self._col_cum[true_level - 1]
        idx = bisect_right(cum, rng.random())
        return min(idx, NUM_LEVELS - 1) + 1


def estimate_likelihood(
    records: Sequence[PredictionRecord],
    modality: str,
    smoothing: float = 1.0,
) -> LikelihoodMatrix:
    """Per-column frequency estimate with additive smoothing.

    ``l[i][j] = (#(pred=i, true=j) + a) / (#(true=j) + 5a)``. A column with
    no records and ``a = 0`` falls back to the uniform column so the matrix
    stays well-formed on small folds.
    """
    if not records:
        raise InputError("cannot estimate a likelihood matrix from zero records")
    if smoothing < 0.0:
        raise InputError(f"smoothing must be non-negative, got {smoothing}")
    counts = [[0] * NUM_LEVELS for _ in range(NUM_LEVELS)]
    col_totals = [0] * NUM_LEVELS
    for rec in records:
        counts[rec.predicted - 1][rec.true_level - 1] += 1
        col_totals[rec.true_level - 1] += 1
    rows = [[0.0] * NUM_LEVELS for _ in range(NUM_LEVELS)]
    for j in range(NUM_LEVELS):
        denom = col_totals[j] + NUM_LEVELS * smoothing
        for i in range(NUM_LEVELS):
            if denom == 0.0:
                rows[i][j] = 1.0 / NUM_LEVELS
            else:
                rows[i][j] = (counts[i][j] + smoothing) / denom
    return LikelihoodMatrix(tuple(tuple(r) for r in rows), modality)


def mean_likelihood(folds: Sequence[LikelihoodMatrix]) -> LikelihoodMatrix:
    """Entrywise mean of per-fold matrices (all tagged with one modality)."""
    if not folds:
        raise InputError("cannot average zero likelihood matrices")
    modality = folds[0].modality
    if any(f.modality != modality for f in folds):
        raise InputError("cannot average matrices from different modalities")
    k = len(folds)
    rows = tuple(
        tuple(sum(f.rows[i][j] for f in folds) / k for j in range(NUM_LEVELS))
        for i in range(NUM_LEVELS)
    )
    return LikelihoodMatrix(rows, modality)


def k_fold_mean_likelihood(
    records: Sequence[PredictionRecord],
    modality: str,
    folds: int,
    smoothing: float = 0.0,
    seed: int = 0,
) -> LikelihoodMatrix:
    """Shuffle records with ``seed``, split into ``folds`` contiguous folds,
    estimate a matrix on each fold, and return the entrywise mean."""
    if folds < 1:
        raise InputError(f"fold count must be >= 1, got {folds}")
    if len(records) < folds:
        raise InputError(
            f"need at least {folds} records for {folds} folds, got {len(records)}",
            code="E_TOO_FEW_RECORDS",
        )
    shuffled = list(records)
    random.Random(seed).shuffle(shuffled)
    n = len(shuffled)
    base, extra = divmod(n, folds)
    matrices = []
    at = 0
    for k in range(folds):
        size = base + (1 if k < extra else 0)
        matrices.append(estimate_likelihood(shuffled[at : at + size], modality, smoothing))
        at += size
    return mean_likelihood(matrices)


def synth_likelihood(
    diag_accuracy: Sequence[float] | float,
    modality: str = VISION,
) -> LikelihoodMatrix:
    """Build a matrix with the requested per-level diagonal accuracy.

    Off-diagonal mass decays geometrically with the level distance
    (ratio e^-1), flattened toward uniform only when the decay alone would
    move a column's argmax off the diagonal. Each diagonal value must exceed
    0.2, the point below which no off-diagonal spread can keep the argmax on
    the diagonal.
    """
    if isinstance(diag_accuracy, (int, float)):
        diag_accuracy = (float(diag_accuracy),) * NUM_LEVELS
    if len(diag_accuracy) != NUM_LEVELS:
        raise InputError("diag_accuracy needs one value per danger level")
    rows = [[0.0] * NUM_LEVELS for _ in range(NUM_LEVELS)]
    uniform_share = 1.0 / (NUM_LEVELS - 1)
    for j in range(NUM_LEVELS):
        g = float(diag_accuracy[j])
        if not 0.2 < g <= 1.0:
            raise InputError(
                f"diag_accuracy[{j + 1}] must be in (0.2, 1], got {g}; "
                "smaller values cannot keep the column argmax on the diagonal"
            )
        rows[j][j] = g
        off = 1.0 - g
        if off == 0.0:
            continue
        weights = [math.exp(-abs(i - j)) for i in range(NUM_LEVELS)]
        weights[j] = 0.0
        z = sum(weights)
        shares = [w / z for w in weights]
        # Blend toward the uniform spread just enough that the largest
        # off-diagonal entry stays strictly below the diagonal.
        max_share = max(shares)
        allowed = g * (1.0 - 1e-9) / off
        if max_share > allowed:
            lam = (allowed - uniform_share) / (max_share - uniform_share)
            lam = max(0.0, min(1.0, lam))
            shares = [
                lam * s + (1.0 - lam) * uniform_share if i != j else 0.0
                for i, s in enumerate(shares)
            ]
        for i in range(NUM_LEVELS):
            if i != j:
                rows[i][j] = off * shares[i]
    return LikelihoodMatrix(tuple(tuple(r) for r in rows), modality)


# ---------------------------------------------------------------------------
# File format
# ---------------------------------------------------------------------------

def matrix_to_dict(matrix: LikelihoodMatrix) -> dict:
    return {"modality": matrix.modality, "l": [list(r) for r in matrix.rows]}


def matrix_from_dict(data: dict, source: str = "likelihood matrix") -> LikelihoodMatrix:
    try:
        modality = data["modality"]
        rows = tuple(tuple(float(v) for v in row) for row in data["l"])
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"{source}: malformed matrix object: {exc}", code="E_MATRIX_INVALID")
    try:
        return LikelihoodMatrix(rows, modality)
    except InputError as exc:
        raise InputError(f"{source}: {exc}", code="E_MATRIX_INVALID")


def load_matrix(path: str | Path) -> LikelihoodMatrix:
    try:
        with open(path) as fh:
            data = json.load(fh)
    except json.JSONDecodeError as exc:
        raise InputError(f"{path}: not valid JSON: {exc}", code="E_MATRIX_INVALID")
    return matrix_from_dict(data, source=str(path))


def save_matrix(matrix: LikelihoodMatrix, path: str | Path) -> None:
    with open(path, "w") as fh:
        json.dump(matrix_to_dict(matrix), fh, indent=2)
        fh.write("\n")
