import itertools
import math

import numpy as np
import pytest

from rangesurvey.errors import IllPosedError
from rangesurvey.grid import SurveyGrid
from rangesurvey.hypotheses import (HypothesisSet, ObservationLog, PosteriorState,
                                    update_posterior)
from rangesurvey.learner import (ONLINE_LABEL, FittedModel, TrainConfig,
                                 cross_entropy_gradient, cross_entropy_objective,
                                 fit_logistic, fuse_online, weighted_average_model)


def finite_difference_gradient(w, b, X, y, l2, step=1e-5):
    """Central-difference gradient of the training objective."""
    grad_w = np.zeros_like(w)
    for i in range(w.size):
        up, down = w.copy(), w.copy()
        up[i] += step
        down[i] -= step
        grad_w[i] = (cross_entropy_objective(up, b, X, y, l2)
                     - cross_entropy_objective(down, b, X, y, l2)) / (2 * step)
    grad_b = (cross_entropy_objective(w, b + step, X, y, l2)
              - cross_entropy_objective(w, b - step, X, y, l2)) / (2 * step)
    return grad_w, grad_b


def toy_grid(features):
    features = np.asarray(features, dtype=float)
    n = features.shape[0]
    return SurveyGrid(lats=np.linspace(-60, 60, n), lons=np.linspace(-120, 120, n),
                      features=features)


class TestGradient:
    def test_matches_finite_differences(self, rng):
        for _ in range(50):
            n = int(rng.integers(2, 12))
            d = int(rng.integers(1, 6))
            X = rng.normal(size=(n, d))
            y = rng.integers(0, 2, size=n).astype(float)
            w = rng.normal(size=d)
            b = float(rng.normal())
            l2 = float(rng.uniform(0, 2))
            gw, gb = cross_entropy_gradient(w, b, X, y, l2)
            fw, fb = finite_difference_gradient(w, b, X, y, l2)
            scale = max(np.max(np.abs(fw)), abs(fb), 1e-8)
            assert np.max(np.abs(gw - fw)) / scale <= 1e-4
            assert abs(gb - fb) / scale <= 1e-4

    def test_objective_non_increasing(self, rng):
        X = rng.normal(size=(10, 3))
        y = rng.integers(0, 2, size=10).astype(float)
        grid = toy_grid(X)
        log = ObservationLog.from_pairs([(i, int(y[i])) for i in range(10)])
        _, history = fit_logistic(log, grid, TrainConfig(), track_objective=True)
        assert len(history) > 1
        diffs = np.diff(history)
        assert np.all(diffs <= 0.0)


class TestFitLogistic:
    def test_separable_pair(self):
        grid = toy_grid([[1.0, 0.0], [-1.0, 0.0]])
        log = ObservationLog.from_pairs([(0, 1), (1, 0)])
        model = fit_logistic(log, grid, TrainConfig(l2_strength=0.5))
        assert model.source == "online"
        assert model.predict(grid.features[0]) > 0.5
        assert model.predict(grid.features[1]) < 0.5

    def test_contradictory_duplicates_balance(self):
        # Same features, opposite labels: the fit must sit on the fence.
        grid = toy_grid([[0.4, -0.2], [0.4001, -0.2001]])
        log = ObservationLog.from_pairs([(0, 1), (1, 0)])
        model = fit_logistic(log, grid, TrainConfig())
        assert model.predict(grid.features[0]) == pytest.approx(0.5, abs=1e-3)

    def test_single_class_rejected(self):
        grid = toy_grid([[1.0], [2.0]])
        log = ObservationLog.from_pairs([(0, 1), (1, 1)])
        with pytest.raises(IllPosedError):
            fit_logistic(log, grid)

    def test_empty_log_rejected(self, trig_grid):
        with pytest.raises(IllPosedError):
            fit_logistic(ObservationLog(), trig_grid)

    def test_matches_brute_force_search(self, rng):
        # Coarse grid over (w1, w2, b) followed by local refinement around
        # the best knot; the optimizer must do at least as well, within 1e-3.
        X = np.array([[1.2, 0.1], [0.8, -0.4], [-0.9, 0.3],
                      [-1.1, -0.2], [0.2, 1.0], [-0.3, -1.2]])
        y = np.array([1.0, 1.0, 0.0, 0.0, 1.0, 0.0])
        grid = toy_grid(X)
        log = ObservationLog.from_pairs([(i, int(y[i])) for i in range(6)])
        l2 = 1.0

        best = (math.inf, None)
        axis = np.linspace(-3, 3, 13)
        for w1, w2, b in itertools.product(axis, axis, axis):
            f = cross_entropy_objective(np.array([w1, w2]), b, X, y, l2)
            if f < best[0]:
                best = (f, (w1, w2, b))
        center = np.array(best[1])
        width = 0.5
        for _ in range(14):
            span = np.linspace(-width, width, 9)
            for dw1, dw2, db in itertools.product(span, span, span):
                cand = center + np.array([dw1, dw2, db])
                f = cross_entropy_objective(cand[:2], cand[2], X, y, l2)
                if f < best[0]:
                    best = (f, tuple(cand))
            center = np.array(best[1])
            width *= 0.5

        model = fit_logistic(log, grid, TrainConfig(l2_strength=l2))
        fitted = cross_entropy_objective(model.weights, model.bias, X, y, l2)
        assert fitted == pytest.approx(best[0], abs=1e-3)

    def test_deterministic(self, rng):
        X = rng.normal(size=(8, 4))
        labels = [1, 0, 1, 0, 1, 1, 0, 0]
        grid = toy_grid(X)
        log = ObservationLog.from_pairs(list(enumerate(labels)))
        a = fit_logistic(log, grid)
        b = fit_logistic(log, grid)
        assert np.array_equal(a.weights, b.weights) and a.bias == b.bias


class TestWeightedAverage:
    def test_single_member_identity(self, proj_hypotheses):
        solo = HypothesisSet.from_members([proj_hypotheses.member(2)])
        model = weighted_average_model(solo, PosteriorState.uniform(1))
        assert model.source == "averaged"
        np.testing.assert_array_equal(model.weights, proj_hypotheses.weights[2])
        assert model.bias == proj_hypotheses.biases[2]

    def test_midpoint(self):
        hset = HypothesisSet(weights=np.array([[1.0, 0.0], [0.0, 1.0]]),
                             biases=np.array([2.0, 4.0]))
        model = weighted_average_model(hset, PosteriorState.uniform(2))
        np.testing.assert_allclose(model.weights, [0.5, 0.5])
        assert model.bias == pytest.approx(3.0)

    def test_three_member_oracle(self, rng):
        hset = HypothesisSet(weights=rng.normal(size=(3, 4)),
                             biases=rng.normal(size=3))
        w = np.array([0.2, 0.3, 0.5])
        post = PosteriorState(log_likelihoods=np.log(w), weights=w)
        model = weighted_average_model(hset, post)
        want_w = sum(w[k] * hset.weights[k] for k in range(3))
        want_b = sum(w[k] * hset.biases[k] for k in range(3))
        np.testing.assert_allclose(model.weights, want_w, atol=1e-12)
        assert model.bias == pytest.approx(want_b, abs=1e-12)

    def test_convex_hull_coordinatewise(self, proj_hypotheses, rng):
        post = PosteriorState.from_log_likelihoods(rng.normal(size=len(proj_hypotheses)))
        model = weighted_average_model(proj_hypotheses, post)
        lo = proj_hypotheses.weights.min(axis=0) - 1e-12
        hi = proj_hypotheses.weights.max(axis=0) + 1e-12
        assert np.all(model.weights >= lo) and np.all(model.weights <= hi)
        assert proj_hypotheses.biases.min() - 1e-12 <= model.bias
        assert model.bias <= proj_hypotheses.biases.max() + 1e-12


class TestFuseOnline:
    def test_appends_member(self, proj_hypotheses, rng):
        online = FittedModel(weights=rng.normal(size=proj_hypotheses.feature_dim),
                             bias=0.1, source="online")
        fused = fuse_online(proj_hypotheses, online)
        assert len(fused) == len(proj_hypotheses) + 1
        np.testing.assert_array_equal(fused.weights[:-1], proj_hypotheses.weights)
        np.testing.assert_array_equal(fused.weights[-1], online.weights)
        assert fused.labels[-1] == ONLINE_LABEL

    def test_uniform_prior_over_fused(self, proj_hypotheses, trig_grid, rng):
        online = FittedModel(weights=rng.normal(size=proj_hypotheses.feature_dim),
                             bias=0.0, source="online")
        fused = fuse_online(proj_hypotheses, online)
        post = update_posterior(fused, ObservationLog(), trig_grid)
        np.testing.assert_allclose(post.weights, 1.0 / len(fused))

    def test_rejects_averaged_models(self, proj_hypotheses):
        averaged = FittedModel(weights=np.zeros(proj_hypotheses.feature_dim),
                               bias=0.0, source="averaged")
        with pytest.raises(ValueError, match="online"):
            fuse_online(proj_hypotheses, averaged)

    def test_rejects_dimension_mismatch(self, proj_hypotheses):
        online = FittedModel(weights=np.zeros(proj_hypotheses.feature_dim + 1),
                             bias=0.0, source="online")
        with pytest.raises(ValueError, match="dimension"):
            fuse_online(proj_hypotheses, online)

    def test_fused_posterior_hand_normalized(self):
        # K members all matching each observation with probability 0.5 and
        # an online member matching perfectly (up to the clamp): its weight
        # is p_on^t / (p_on^t + K 0.5^t) with p_on the clamped match.
        from rangesurvey.hypotheses import MATCH_CLAMP
        from tests.test_hypotheses import probe_world

        t = 3
        k = 4
        probs = np.full((k, t), 0.5)
        grid, hset = probe_world(probs)
        logits = np.full(t, 900.0)  # saturates to exactly 1, clamped in the LL
        online = FittedModel(weights=logits * 1.0, bias=0.0, source="online")
        fused = fuse_online(hset, online)
        log = ObservationLog.from_pairs([(i, 1) for i in range(t)])
        post = update_posterior(fused, log, grid)
        p_on = 1.0 - MATCH_CLAMP
        want_online = p_on**t / (p_on**t + k * 0.5**t)
        assert post.weights[-1] == pytest.approx(want_online, rel=1e-9)
