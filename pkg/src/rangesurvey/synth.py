"""Synthetic worlds: candidate sets and test species built from seeds.

Generated candidate ranges are linear classifiers over the grid features
whose presence fractions are forced into a band of plausibly-sized ranges.
Test species are made from those candidates (an exact member, a parameter
mixture of several, or an independent fresh draw), so the difficulty of
recovering them is controlled by construction.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import GenerationError
from .grid import DEFAULT_FEATURE_DIM, build_fibonacci_grid, make_encoder
from .hypotheses import HypothesisSet, sigmoid
from .oracle import GroundTruth

SPECIES_MODES = ("member", "mixture", "independent")

# Presence fractions of generated ranges are confined to this band so that
# ranking metrics stay discriminative: ranges cover some of the world but
# never most of it.
PRESENCE_BAND = (0.01, 0.3)

_BISECT_MAX_ITERS = 100
_SPECIES_MAX_ATTEMPTS = 50


@dataclass(frozen=True)
class SynthConfig:
    """Recipe for a synthetic world."""

    n_cells: int = 2000
    n_hypotheses: int = 200
    feature_dim: int = DEFAULT_FEATURE_DIM
    encoder_kind: str = "random_projection"
    encoder_seed: int = 0
    hypothesis_seed: int = 1
    species_mode: str = "mixture"
    mixture_arity: int = 2
    threshold: float = 0.5
    logit_scale: float = 3.0

    def __post_init__(self):
        if self.n_hypotheses < 1:
            raise ValueError("n_hypotheses must be >= 1")
        if self.species_mode not in SPECIES_MODES:
            raise ValueError(f"unknown species mode {self.species_mode!r}")
        if self.species_mode == "mixture" and self.mixture_arity < 2:
            raise ValueError("mixture_arity must be >= 2 in mixture mode")
        if not 0.0 < self.threshold < 1.0:
            raise ValueError("threshold must lie in (0, 1)")
        if self.logit_scale <= 0:
            raise ValueError("logit_scale must be positive")


def _bisect_bias(logits, band=PRESENCE_BAND):
    """Find a bias whose presence fraction over the grid lands in ``band``."""
    lo = float(-logits.max())  # fraction 0
    hi = float(-logits.min()) + 1e-9  # fraction 1
    for _ in range(_BISECT_MAX_ITERS):
        mid = 0.5 * (lo + hi)
        frac = float(np.mean(logits + mid > 0.0))
        if band[0] <= frac <= band[1]:
            return mid
        if frac < band[0]:
            lo = mid
        else:
            hi = mid
    raise GenerationError(
        f"bias bisection failed after {_BISECT_MAX_ITERS} iterations; the grid is "
        "too small for the presence band")


def _draw_classifier(rng, grid, scale):
    weights = rng.normal(0.0, scale / np.sqrt(grid.feature_dim), size=grid.feature_dim)
    bias = _bisect_bias(grid.features @ weights)
    return weights, bias


def gen_hypotheses(cfg, grid):
    """Generate the candidate set for a grid, deterministically per seed."""
    rng = np.random.default_rng(cfg.hypothesis_seed)
    weights = np.empty((cfg.n_hypotheses, grid.feature_dim))
    biases = np.empty(cfg.n_hypotheses)
    for k in range(cfg.n_hypotheses):
        weights[k], biases[k] = _draw_classifier(rng, grid, cfg.logit_scale)
    return HypothesisSet(weights=weights, biases=biases)


def presence_fraction(hset, grid, k):
    logits = grid.features @ hset.weights[k] + hset.biases[k]
    return float(np.mean(logits > 0.0))


def gen_test_species(cfg, hset, grid, rng, label=None):
    """Generate one ground-truth species from the candidate set.

    member: a uniformly chosen member's thresholded predictions, with the
    member recorded for diagnostics. mixture: thresholded predictions of
    the parameter average of ``mixture_arity`` members drawn with
    replacement. independent: a fresh classifier drawn like the candidates.
    Single-class draws are rejected and retried.
    """
    for attempt in range(_SPECIES_MAX_ATTEMPTS):
        if cfg.species_mode == "member":
            k = int(rng.integers(len(hset)))
            weights, bias = hset.weights[k], float(hset.biases[k])
            sources = (k,)
        elif cfg.species_mode == "mixture":
            idx = rng.integers(len(hset), size=cfg.mixture_arity)
            weights = hset.weights[idx].mean(axis=0)
            bias = float(hset.biases[idx].mean())
            sources = tuple(int(i) for i in idx)
        else:
            weights, bias = _draw_classifier(rng, grid, cfg.logit_scale)
            sources = ()
        labels = (sigmoid(grid.features @ weights + bias) > cfg.threshold).astype(int)
        if labels.min() != labels.max():
            name = label if label is not None else f"{cfg.species_mode}_species"
            return GroundTruth(labels=labels, species_label=name,
                               source_members=sources)
    raise GenerationError(
        f"no two-class species after {_SPECIES_MAX_ATTEMPTS} draws in mode "
        f"{cfg.species_mode!r}")


def build_synthetic_world(cfg, land_mask=None):
    """Build the grid and candidate set a config describes."""
    encoder = make_encoder(cfg.encoder_kind, seed=cfg.encoder_seed, dim=cfg.feature_dim)
    grid = build_fibonacci_grid(cfg.n_cells, encoder, land_mask=land_mask)
    return grid, gen_hypotheses(cfg, grid)
