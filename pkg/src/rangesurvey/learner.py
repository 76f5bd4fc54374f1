"""Model estimation: posterior-weighted parameter averaging and the online
logistic regressor fit to the accumulated observations.

The observation sets here are tiny (tens to a few hundred points), so the
online fit uses plain full-batch gradient descent with a backtracking line
search rather than anything fancier.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import IllPosedError
from .hypotheses import Hypothesis, sigmoid

ONLINE_LABEL = "h_online"


@dataclass(frozen=True)
class TrainConfig:
    """Settings for the gradient-descent logistic fit.

    ``l2_strength`` penalizes the weight vector only; the bias is free.
    ``step_size`` is the initial trial step of the line search.
    """

    l2_strength: float = 1.0
    max_iters: int = 500
    step_size: float = 1.0
    grad_tol: float = 1e-6

    def __post_init__(self):
        if self.l2_strength < 0:
            raise ValueError("l2_strength must be nonnegative")
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if self.step_size <= 0 or self.grad_tol <= 0:
            raise ValueError("step_size and grad_tol must be positive")


@dataclass(frozen=True)
class FittedModel:
    """A single linear presence model produced by averaging or fitting."""

    weights: np.ndarray
    bias: float
    source: str  # "averaged" or "online"

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "bias", float(self.bias))
        if not (np.all(np.isfinite(w)) and np.isfinite(self.bias)):
            raise ValueError("model parameters must be finite")
        if self.source not in ("averaged", "online"):
            raise ValueError(f"unknown model source {self.source!r}")

    def predict(self, x):
        return float(sigmoid(self.weights @ np.asarray(x, dtype=float) + self.bias))

    def predict_many(self, features):
        return sigmoid(np.asarray(features, dtype=float) @ self.weights + self.bias)

    def logits(self, features):
        return np.asarray(features, dtype=float) @ self.weights + self.bias


def weighted_average_model(hset, posterior):
    """Convex combination of member parameters under the posterior weights."""
    w = posterior.weights
    if len(w) != len(hset):
        raise ValueError("posterior does not match hypothesis set size")
    return FittedModel(weights=w @ hset.weights, bias=float(w @ hset.biases),
                       source="averaged")


def cross_entropy_objective(weights, bias, features, labels, l2_strength):
    """Summed cross-entropy loss plus the l2 penalty on the weights.

    Uses ``log(1 + e^z) - y*z`` per point, evaluated via logaddexp for
    stability at large logits.
    """
    z = features @ weights + bias
    ce = float(np.sum(np.logaddexp(0.0, z) - labels * z))
    return ce + 0.5 * l2_strength * float(weights @ weights)


def cross_entropy_gradient(weights, bias, features, labels, l2_strength):
    """Gradient of :func:`cross_entropy_objective` in (weights, bias)."""
    residual = sigmoid(features @ weights + bias) - labels
    grad_w = features.T @ residual + l2_strength * weights
    grad_b = float(np.sum(residual))
    return grad_w, grad_b


def _descend(features, labels, cfg, track_objective=False):
    dim = features.shape[1]
    w = np.zeros(dim)
    b = 0.0
    f = cross_entropy_objective(w, b, features, labels, cfg.l2_strength)
    history = [f] if track_objective else None
    step = cfg.step_size
    for _ in range(cfg.max_iters):
        gw, gb = cross_entropy_gradient(w, b, features, labels, cfg.l2_strength)
        grad_norm_inf = max(np.max(np.abs(gw)) if dim else 0.0, abs(gb))
        if grad_norm_inf <= cfg.grad_tol:
            break
        g_sq = float(gw @ gw) + gb * gb
        # Armijo backtracking; the accepted step seeds the next trial, grown
        # so a too-small step cannot stick.
        step = min(step * 2.0, cfg.step_size)
        accepted = False
        while step > 1e-20:
            w_new = w - step * gw
            b_new = b - step * gb
            f_new = cross_entropy_objective(w_new, b_new, features, labels, cfg.l2_strength)
            if f_new <= f - 1e-4 * step * g_sq:
                accepted = True
                break
            step *= 0.5
        if not accepted:
            break
        w, b, f = w_new, b_new, f_new
        if track_objective:
            history.append(f)
    return w, b, history


def fit_logistic(log, grid, cfg=TrainConfig(), track_objective=False):
    """Fit the online logistic regressor to the observation log.

    Requires at least one observation of each class. Returns the model;
    with ``track_objective`` returns ``(model, per_iteration_objectives)``.
    """
    if len(log) == 0:
        raise IllPosedError("cannot fit a model to an empty observation log")
    ids = log.cell_ids()
    if ids.min() < 0 or ids.max() >= grid.n_cells:
        raise ValueError("observation cell id outside grid")
    labels = log.labels()
    if labels.min() == labels.max():
        raise IllPosedError("observations contain a single class; the fit is ill-posed")
    features = grid.features[ids]
    w, b, history = _descend(features, labels, cfg, track_objective)
    model = FittedModel(weights=w, bias=b, source="online")
    if track_objective:
        return model, history
    return model


def fuse_online(hset, online):
    """Append the online model to the candidate set as one more member."""
    if online.source != "online":
        raise ValueError(f"expected an online model, got source {online.source!r}")
    if online.weights.shape != (hset.feature_dim,):
        raise ValueError(
            f"online model dimension {online.weights.shape[0]} does not match set "
            f"dimension {hset.feature_dim}")
    return hset.append(Hypothesis(online.weights, online.bias, ONLINE_LABEL))
