import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from rangesurvey.errors import GenerationError, ParseError
from rangesurvey.oracle import (GroundTruth, NoiseModel, init_observations,
                                load_ground_truth, query_label, save_ground_truth)


def small_gt(labels, valid=None):
    return GroundTruth(labels=np.array(labels), species_label="test", valid=valid)


class TestGroundTruth:
    def test_requires_both_classes(self):
        with pytest.raises(GenerationError):
            small_gt([1, 1, 1])

    def test_validity_mask_counts(self):
        # Both classes must appear among *valid* cells.
        with pytest.raises(GenerationError):
            small_gt([1, 1, 0], valid=np.array([True, True, False]))

    def test_mask_defaults_to_all_valid(self):
        gt = small_gt([1, 0, 1])
        assert gt.valid.all()


class TestQueryLabel:
    def test_noiseless_matches_truth(self):
        gt = small_gt([1, 0, 1, 0])
        noise = NoiseModel(0.0, seed=0)
        assert [query_label(gt, noise, i) for i in range(4)] == [1, 0, 1, 0]

    def test_rate_one_misses_every_presence(self):
        gt = small_gt([1, 0, 1, 0])
        noise = NoiseModel(1.0, seed=0)
        assert [query_label(gt, noise, i) for i in range(4)] == [0, 0, 0, 0]

    def test_flip_fraction_matches_rate(self):
        # 10^4 presence queries at rate 0.25: misses within 5 sigma.
        gt = small_gt([1, 0])
        noise = NoiseModel(0.25, seed=7)
        n = 10_000
        misses = sum(1 - query_label(gt, noise, 0) for _ in range(n))
        sigma = np.sqrt(n * 0.25 * 0.75)
        assert abs(misses - n * 0.25) <= 5 * sigma

    @given(seed=st.integers(0, 2**32 - 1), rate=st.floats(0, 1))
    @settings(max_examples=60, deadline=None)
    def test_no_false_positives(self, seed, rate):
        gt = small_gt([1, 0])
        noise = NoiseModel(rate, seed=seed)
        assert all(query_label(gt, noise, 1) == 0 for _ in range(5))

    def test_zero_rate_is_pure(self):
        gt = small_gt([1, 0])
        noise = NoiseModel(0.0, seed=3)
        assert all(query_label(gt, noise, 0) == 1 for _ in range(10))

    def test_invalid_cell(self):
        gt = small_gt([1, 0])
        with pytest.raises(ValueError):
            query_label(gt, NoiseModel(), 2)

    def test_draws_consumed_deterministically(self):
        gt = small_gt([1, 0])
        a = NoiseModel(0.5, seed=11)
        b = NoiseModel(0.5, seed=11)
        seq_a = [query_label(gt, a, 0) for _ in range(20)]
        seq_b = [query_label(gt, b, 0) for _ in range(20)]
        assert seq_a == seq_b


class TestInitObservations:
    def test_pair_shape(self, trig_grid, rng):
        labels = np.zeros(trig_grid.n_cells, dtype=int)
        labels[:10] = 1
        gt = GroundTruth(labels=labels, species_label="s")
        log = init_observations(gt, trig_grid, rng)
        assert len(log) == 2
        (first, second) = list(log)
        assert first.label == 1 and gt.labels[first.cell_id] == 1
        assert second.label == 0 and gt.labels[second.cell_id] == 0

    def test_forced_single_presence(self, trig_grid, rng):
        labels = np.zeros(trig_grid.n_cells, dtype=int)
        labels[31] = 1
        gt = GroundTruth(labels=labels, species_label="s")
        log = init_observations(gt, trig_grid, rng)
        assert list(log)[0].cell_id == 31

    def test_deterministic_per_seed(self, trig_grid):
        labels = np.zeros(trig_grid.n_cells, dtype=int)
        labels[::3] = 1
        gt = GroundTruth(labels=labels, species_label="s")
        pair_a = [(o.cell_id, o.label)
                  for o in init_observations(gt, trig_grid, np.random.default_rng(9))]
        pair_b = [(o.cell_id, o.label)
                  for o in init_observations(gt, trig_grid, np.random.default_rng(9))]
        assert pair_a == pair_b

    def test_presence_choice_uniform(self, trig_grid):
        # 1000 seeded draws over 5 presence cells: within 5 sigma of uniform.
        labels = np.zeros(trig_grid.n_cells, dtype=int)
        presence = [2, 9, 17, 30, 44]
        labels[presence] = 1
        gt = GroundTruth(labels=labels, species_label="s")
        n = 1000
        counts = {c: 0 for c in presence}
        for seed in range(n):
            log = init_observations(gt, trig_grid, np.random.default_rng(seed))
            counts[list(log)[0].cell_id] += 1
        sigma = np.sqrt(n * 0.2 * 0.8)
        for c in presence:
            assert abs(counts[c] - n * 0.2) <= 5 * sigma

    def test_respects_validity_mask(self, trig_grid):
        labels = np.zeros(trig_grid.n_cells, dtype=int)
        labels[:20] = 1
        valid = np.zeros(trig_grid.n_cells, dtype=bool)
        valid[10:40] = True
        gt = GroundTruth(labels=labels, species_label="s", valid=valid)
        for seed in range(20):
            log = init_observations(gt, trig_grid, np.random.default_rng(seed))
            for obs in log:
                assert valid[obs.cell_id]


class TestGroundTruthFiles:
    def test_roundtrip(self, tmp_path):
        gt = small_gt([1, 0, 1, 0, 0], valid=np.array([1, 1, 0, 1, 1], dtype=bool))
        path = tmp_path / "gt.csv"
        save_ground_truth(gt, path)
        back = load_ground_truth(path, species_label="test")
        np.testing.assert_array_equal(back.labels, gt.labels)
        np.testing.assert_array_equal(back.valid, gt.valid)

    def test_default_valid_column(self, tmp_path):
        path = tmp_path / "gt.csv"
        path.write_text("0,1\n1,0\n")
        gt = load_ground_truth(path)
        assert gt.valid.all()

    def test_bad_label_names_line(self, tmp_path):
        path = tmp_path / "gt.csv"
        path.write_text("0,1\n1,7\n")
        with pytest.raises(ParseError, match=":2:"):
            load_ground_truth(path)

    def test_missing_cell_id(self, tmp_path):
        path = tmp_path / "gt.csv"
        path.write_text("0,1\n2,0\n")
        with pytest.raises(ParseError):
            load_ground_truth(path)

    def test_duplicate_cell_id(self, tmp_path):
        path = tmp_path / "gt.csv"
        path.write_text("0,1\n0,0\n")
        with pytest.raises(ParseError, match="duplicate"):
            load_ground_truth(path)
