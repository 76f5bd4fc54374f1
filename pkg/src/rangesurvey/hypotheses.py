"""Candidate range models and their posterior given survey observations.

A hypothesis is a linear presence classifier over grid features. The set of
candidates is scored against the observations collected so far; posterior
weights are kept in log space so that hundreds of observations cannot
underflow the un-normalized likelihoods.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ParseError

# Per-observation match probabilities are clamped away from {0, 1} so a
# single contradicting (possibly noisy) label cannot zero a hypothesis out
# of the posterior forever.
MATCH_CLAMP = 1e-6


def sigmoid(z):
    """Numerically stable logistic function, elementwise."""
    z = np.asarray(z, dtype=float)
    out = np.empty_like(z)
    pos = z >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-z[pos]))
    ez = np.exp(z[~pos])
    out[~pos] = ez / (1.0 + ez)
    if out.ndim == 0:
        return float(out)
    return out


@dataclass(frozen=True)
class Hypothesis:
    """A linear presence classifier: weight vector, bias, and a name."""

    weights: np.ndarray
    bias: float
    label: str = ""

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "bias", float(self.bias))
        if w.ndim != 1:
            raise ValueError("hypothesis weights must be a vector")
        if not (np.all(np.isfinite(w)) and np.isfinite(self.bias)):
            raise ValueError("hypothesis parameters must be finite")


@dataclass(frozen=True)
class HypothesisSet:
    """An ordered set of candidate hypotheses sharing one feature space."""

    weights: np.ndarray  # (K, D)
    biases: np.ndarray   # (K,)
    labels: tuple = ()

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=float)
        b = np.asarray(self.biases, dtype=float)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "biases", b)
        if w.ndim != 2 or w.shape[0] == 0:
            raise ValueError("hypothesis set must be a non-empty (K, D) matrix")
        if b.shape != (w.shape[0],):
            raise ValueError("biases must align with hypothesis rows")
        if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
            raise ValueError("hypothesis parameters must be finite")
        if not self.labels:
            object.__setattr__(self, "labels", tuple(f"h{k}" for k in range(w.shape[0])))
        elif len(self.labels) != w.shape[0]:
            raise ValueError("labels must align with hypothesis rows")

    @classmethod
    def from_members(cls, members):
        members = list(members)
        return cls(weights=np.stack([m.weights for m in members]),
                   biases=np.array([m.bias for m in members]),
                   labels=tuple(m.label for m in members))

    def __len__(self):
        return int(self.weights.shape[0])

    @property
    def feature_dim(self):
        return int(self.weights.shape[1])

    def member(self, k):
        return Hypothesis(self.weights[k], float(self.biases[k]), self.labels[k])

    @property
    def members(self):
        return [self.member(k) for k in range(len(self))]

    def append(self, hypothesis):
        """Return a new set with ``hypothesis`` added after the members."""
        if hypothesis.weights.shape != (self.feature_dim,):
            raise ValueError(
                f"hypothesis dimension {hypothesis.weights.shape[0]} does not match set "
                f"dimension {self.feature_dim}")
        return HypothesisSet(
            weights=np.vstack([self.weights, hypothesis.weights[None, :]]),
            biases=np.append(self.biases, hypothesis.bias),
            labels=self.labels + (hypothesis.label,))

    def subset(self, indices):
        indices = np.asarray(indices, dtype=int)
        return HypothesisSet(weights=self.weights[indices],
                             biases=self.biases[indices],
                             labels=tuple(self.labels[i] for i in indices))

    def without(self, excluded):
        """Return a new set with the given member indices removed."""
        excluded = set(int(i) for i in excluded)
        keep = [k for k in range(len(self)) if k not in excluded]
        if not keep:
            raise ValueError("cannot exclude every hypothesis")
        return self.subset(keep)


@dataclass(frozen=True)
class Observation:
    cell_id: int
    label: int

    def __post_init__(self):
        object.__setattr__(self, "cell_id", int(self.cell_id))
        object.__setattr__(self, "label", int(self.label))
        if self.label not in (0, 1):
            raise ValueError(f"label must be 0 or 1, got {self.label}")


class ObservationLog:
    """The labelled cells accumulated so far; each cell appears at most once."""

    def __init__(self, entries=()):
        self.entries = []
        self._seen = set()
        for obs in entries:
            self.append(obs.cell_id, obs.label)

    def append(self, cell_id, label):
        obs = Observation(cell_id, label)
        if obs.cell_id in self._seen:
            raise ValueError(f"cell {obs.cell_id} already sampled")
        self.entries.append(obs)
        self._seen.add(obs.cell_id)

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    def cell_ids(self):
        return np.array([o.cell_id for o in self.entries], dtype=int)

    def labels(self):
        return np.array([o.label for o in self.entries], dtype=float)

    def sampled(self):
        return frozenset(self._seen)

    def copy(self):
        return ObservationLog(self.entries)

    @classmethod
    def from_pairs(cls, pairs):
        log = cls()
        for cell_id, label in pairs:
            log.append(cell_id, label)
        return log


@dataclass(frozen=True)
class PosteriorState:
    """Per-hypothesis log-likelihoods and the normalized weights they imply."""

    log_likelihoods: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        ll = np.asarray(self.log_likelihoods, dtype=float)
        w = np.asarray(self.weights, dtype=float)
        object.__setattr__(self, "log_likelihoods", ll)
        object.__setattr__(self, "weights", w)
        if ll.shape != w.shape or ll.ndim != 1:
            raise ValueError("log-likelihoods and weights must be aligned vectors")
        if np.any(w < 0) or abs(w.sum() - 1.0) > 1e-9:
            raise ValueError("weights must be nonnegative and sum to 1")

    @classmethod
    def from_log_likelihoods(cls, log_likelihoods):
        ll = np.asarray(log_likelihoods, dtype=float)
        shifted = ll - ll.max()
        w = np.exp(shifted)
        w /= w.sum()
        return cls(log_likelihoods=ll, weights=w)

    @classmethod
    def uniform(cls, n):
        return cls.from_log_likelihoods(np.zeros(n))


def _check_cells(cell_ids, grid):
    if cell_ids.size and (cell_ids.min() < 0 or cell_ids.max() >= grid.n_cells):
        raise ValueError("observation cell id outside grid")


def predict(hypothesis, x):
    """Presence probability of one hypothesis at one feature vector."""
    x = np.asarray(x, dtype=float)
    if x.shape != hypothesis.weights.shape:
        raise ValueError(
            f"feature dimension {x.shape} does not match hypothesis {hypothesis.weights.shape}")
    return float(sigmoid(hypothesis.weights @ x + hypothesis.bias))


def member_probabilities(hset, features):
    """Presence probabilities of every member at every feature row, (K, n)."""
    features = np.asarray(features, dtype=float)
    return sigmoid(hset.weights @ features.T + hset.biases[:, None])


def match_probabilities(probs, labels):
    """Probability each prediction assigns to the observed label."""
    labels = np.asarray(labels, dtype=float)
    return labels * probs + (1.0 - labels) * (1.0 - probs)


def log_likelihood(hypothesis, log, grid):
    """Log-likelihood of the observations under one hypothesis.

    The product of per-observation match probabilities, taken in log space
    with each factor clamped to [MATCH_CLAMP, 1 - MATCH_CLAMP]. An empty
    log yields 0.
    """
    if len(log) == 0:
        return 0.0
    ids = log.cell_ids()
    _check_cells(ids, grid)
    probs = sigmoid(grid.features[ids] @ hypothesis.weights + hypothesis.bias)
    match = match_probabilities(probs, log.labels())
    return float(np.sum(np.log(np.clip(match, MATCH_CLAMP, 1.0 - MATCH_CLAMP))))


def update_posterior(hset, log, grid):
    """Posterior over the hypothesis set given the observation log.

    A uniform prior is assumed, so weights are the normalized clamped
    likelihoods: ``w_k = exp(LL_k - logsumexp(LL))``. The state is
    recomputed from scratch from the full log on every call.
    """
    if len(log) == 0:
        return PosteriorState.uniform(len(hset))
    ids = log.cell_ids()
    _check_cells(ids, grid)
    probs = member_probabilities(hset, grid.features[ids])
    match = match_probabilities(probs, log.labels())
    ll = np.sum(np.log(np.clip(match, MATCH_CLAMP, 1.0 - MATCH_CLAMP)), axis=1)
    return PosteriorState.from_log_likelihoods(ll)


def committee_prediction(hset, posterior, x, vote_mode="soft"):
    """Posterior-weighted committee presence score at one feature vector.

    soft: the weighted mean of member probabilities. hard: the weighted
    fraction of members voting present (probability above 0.5).
    """
    x = np.asarray(x, dtype=float)
    scores = committee_scores(hset, posterior, x[None, :], vote_mode)
    return float(scores[0])


def committee_scores(hset, posterior, features, vote_mode="soft", member_probs=None,
                     extra_probs=None):
    """Vectorized committee scores over feature rows.

    ``member_probs`` optionally supplies precomputed member probabilities
    for the first rows of the set; ``extra_probs`` supplies rows appended
    after them (used for an online member fused into a cached set).
    """
    if vote_mode not in ("soft", "hard"):
        raise ValueError(f"vote_mode must be soft or hard, got {vote_mode!r}")
    w = posterior.weights
    if len(w) != len(hset):
        raise ValueError("posterior does not match hypothesis set size")
    if member_probs is None:
        member_probs = member_probabilities(hset, features)
    if vote_mode == "hard":
        member_probs = (member_probs > 0.5).astype(float)
        if extra_probs is not None:
            extra_probs = (extra_probs > 0.5).astype(float)
    if extra_probs is None:
        return w @ member_probs
    k = member_probs.shape[0]
    return w[:k] @ member_probs + w[k:] @ extra_probs


def load_hypotheses(path, zero_bias=False):
    """Read a hypothesis set: one ``label,w_1,...,w_D,bias`` row per member.

    ``zero_bias`` discards the stored bias terms (for heads exported
    without one).
    """
    labels, weights, biases = [], [], []
    width = None
    with open(path) as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) < 3:
                raise ParseError(path, line_no, "expected label plus at least 2 numbers")
            if width is None:
                width = len(parts)
            elif len(parts) != width:
                raise ParseError(path, line_no, f"expected {width} fields, got {len(parts)}")
            values = []
            for token in parts[1:]:
                try:
                    values.append(float(token))
                except ValueError:
                    raise ParseError(path, line_no, f"bad number {token!r}") from None
            if not np.all(np.isfinite(values)):
                raise ParseError(path, line_no, "non-finite hypothesis parameter")
            labels.append(parts[0].strip())
            weights.append(values[:-1])
            biases.append(0.0 if zero_bias else values[-1])
    if not labels:
        raise ParseError(path, 1, "hypothesis file contains no rows")
    return HypothesisSet(weights=np.array(weights), biases=np.array(biases),
                         labels=tuple(labels))


def save_hypotheses(hset, path):
    with open(path, "w") as fh:
        for k in range(len(hset)):
            row = [hset.labels[k]]
            row.extend(repr(v) for v in hset.weights[k].tolist())
            row.append(repr(float(hset.biases[k])))
            fh.write(",".join(row) + "\n")
