import math
import random

import pytest

from hazardnav.danger import (
    AnnotationRecord,
    ClassifierMetrics,
    DangerPmf,
    PredictionRecord,
    compute_metrics,
    load_annotation_records,
    load_prediction_records,
    mode_danger,
    save_annotation_records,
    save_prediction_records,
)
from hazardnav.errors import InputError


class TestDangerPmf:
    def test_from_ratings_single_level(self):
        assert DangerPmf.from_ratings([1, 1, 1, 1, 1]).probs == (1, 0, 0, 0, 0)

    def test_from_ratings_hand_normalized(self):
        ratings = [2] * 3 + [3] * 6 + [4] * 3 + [5] * 3
        assert DangerPmf.from_ratings(ratings).probs == (0, 0.2, 0.4, 0.2, 0.2)

    def test_from_ratings_uniform_counts(self):
        assert DangerPmf.from_ratings([1, 2, 3, 4, 5]).probs == (0.2, 0.2, 0.2, 0.2, 0.2)

    def test_from_ratings_empty_rejected(self):
        with pytest.raises(InputError):
            DangerPmf.from_ratings([])

    def test_out_of_range_rating_rejected(self):
        with pytest.raises(InputError):
            DangerPmf.from_ratings([1, 6])
        with pytest.raises(InputError):
            DangerPmf.from_ratings([0])

    def test_invariant_enforced(self):
        with pytest.raises(InputError):
            DangerPmf((0.5, 0.5, 0.5, 0, 0))
        with pytest.raises(InputError):
            DangerPmf((1.2, -0.2, 0, 0, 0))
        with pytest.raises(InputError):
            DangerPmf((1.0, 0.0, 0.0, 0.0))

    def test_from_ratings_always_valid(self):
        rng = random.Random(101)
        for _ in range(300):
            ratings = [rng.randint(1, 5) for _ in range(rng.randint(1, 100))]
            pmf = DangerPmf.from_ratings(ratings)
            assert abs(sum(pmf.probs) - 1.0) <= 1e-9
            assert all(0.0 <= p <= 1.0 for p in pmf.probs)

    def test_cdf_hand_sum(self):
        pmf = DangerPmf((0.05, 0.10, 0.20, 0.50, 0.15))
        assert pmf.cdf(3) == pytest.approx(0.35, abs=1e-12)

    def test_cdf_full_support(self):
        rng = random.Random(7)
        for _ in range(50):
            weights = [rng.random() for _ in range(5)]
            pmf = DangerPmf.from_weights(weights)
            assert pmf.cdf(5) == pytest.approx(1.0, abs=1e-9)

    def test_cdf_no_mass_below(self):
        assert DangerPmf.delta(5).cdf(4) == 0.0

    def test_cdf_monotone_in_tau(self):
        rng = random.Random(8)
        for _ in range(100):
            pmf = DangerPmf.from_weights([rng.random() + 0.01 for _ in range(5)])
            values = [pmf.cdf(tau) for tau in range(1, 6)]
            assert all(a <= b + 1e-15 for a, b in zip(values, values[1:]))


class TestModeDanger:
    def test_unique_mode(self):
        assert mode_danger([2, 2, 3]) == 2

    def test_tie_breaks_high(self):
        assert mode_danger([1, 1, 5, 5]) == 5

    def test_singleton(self):
        assert mode_danger([4]) == 4

    def test_empty_rejected(self):
        with pytest.raises(InputError):
            mode_danger([])

    def test_mode_properties(self):
        rng = random.Random(33)
        for _ in range(300):
            ratings = [rng.randint(1, 5) for _ in range(rng.randint(1, 40))]
            mode = mode_danger(ratings)
            counts = {d: ratings.count(d) for d in range(1, 6)}
            assert counts[mode] == max(counts.values())
            # No tied level sits above the returned one.
            assert all(counts[d] < counts[mode] for d in range(mode + 1, 6))


class TestClassifierMetrics:
    def test_perfect_predictor(self):
        records = [PredictionRecord(d, d) for d in (1, 2, 3, 4, 5)]
        m = compute_metrics(records)
        assert (m.top1, m.rmse, m.off_by_1) == (100.0, 0.0, 100.0)

    def test_hand_computed(self):
        records = [PredictionRecord(1, 2), PredictionRecord(3, 3), PredictionRecord(5, 1)]
        m = compute_metrics(records)
        assert m.top1 == pytest.approx(100 / 3)
        assert m.rmse == pytest.approx(math.sqrt(17 / 3))
        assert m.off_by_1 == pytest.approx(200 / 3)

    def test_randomized_baseline(self):
        # Uniform predictions vs uniform truths: analytic 20% / 2.0 / 52%.
        rng = random.Random(424242)
        records = [
            PredictionRecord(rng.randint(1, 5), rng.randint(1, 5)) for _ in range(100_000)
        ]
        m = compute_metrics(records)
        assert m.top1 == pytest.approx(20.0, abs=0.5)
        assert m.rmse == pytest.approx(2.0, abs=0.02)
        assert m.off_by_1 == pytest.approx(52.0, abs=0.5)

    def test_empty_rejected(self):
        with pytest.raises(InputError):
            compute_metrics([])

    def test_invariants(self):
        rng = random.Random(9)
        for _ in range(200):
            records = [
                PredictionRecord(rng.randint(1, 5), rng.randint(1, 5))
                for _ in range(rng.randint(1, 50))
            ]
            m = compute_metrics(records)
            assert 0.0 <= m.top1 <= m.off_by_1 <= 100.0
            assert (m.rmse == 0.0) == (m.top1 == 100.0)

    def test_metrics_type_rejects_inconsistency(self):
        with pytest.raises(InputError):
            ClassifierMetrics(top1=80.0, rmse=1.0, off_by_1=70.0)
        with pytest.raises(InputError):
            ClassifierMetrics(top1=10.0, rmse=-0.1, off_by_1=20.0)


class TestRecordFiles:
    def test_prediction_round_trip(self, tmp_path):
        records = [PredictionRecord(1, 2), PredictionRecord(5, 5), PredictionRecord(3, 1)]
        path = tmp_path / "records.csv"
        save_prediction_records(records, path)
        assert load_prediction_records(path) == records

    def test_prediction_bad_header(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("a,b\n1,2\n")
        with pytest.raises(InputError) as err:
            load_prediction_records(path)
        assert err.value.code == "E_RECORDS_INVALID"

    def test_prediction_bad_row_names_line(self, tmp_path):
        path = tmp_path / "bad.csv"
        path.write_text("true,predicted\n1,2\nx,3\n")
        with pytest.raises(InputError) as err:
            load_prediction_records(path)
        assert ":3:" in str(err.value)

    def test_prediction_empty_rejected(self, tmp_path):
        path = tmp_path / "empty.csv"
        path.write_text("true,predicted\n")
        with pytest.raises(InputError) as err:
            load_prediction_records(path)
        assert err.value.code == "E_RECORDS_EMPTY"

    def test_annotation_round_trip(self, tmp_path):
        records = [
            AnnotationRecord("img-001", (1, 1, 2), ("smoke", "dark")),
            AnnotationRecord("img-002", (5,), ()),
        ]
        path = tmp_path / "annotations.csv"
        save_annotation_records(records, path)
        assert load_annotation_records(path) == records

    def test_annotation_requires_ratings(self):
        with pytest.raises(InputError):
            AnnotationRecord("img-003", ())
