"""Query-selection rules: given the survey state, pick the next cell.

Every selector scans the candidate cells (valid, not yet sampled) and
returns a cell id. All score-based selectors break ties by lowest cell id
so that runs are exactly reproducible.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, ExhaustedError
from .hypotheses import ObservationLog, committee_scores
from .learner import TrainConfig, fit_logistic

FAMILIES = ("WA", "LR")
SELECTORS = ("HSS", "uncertain", "random", "positive", "EMC", "QBC")
VOTE_MODES = ("soft", "hard")

# Canonical strategy spellings used in configs and result files.
STRATEGY_NAMES = (
    "WA_HSS+", "WA_HSS", "WA_uncertain+", "WA_uncertain", "WA_random+",
    "WA_random", "WA_positive+", "WA_positive", "LR_HSS", "LR_uncertain",
    "LR_random", "LR_positive", "LR_QBC", "LR_EMC",
)


@dataclass(frozen=True)
class StrategySpec:
    """A strategy: model family, query selector, and variants."""

    family: str
    selector: str
    plus_online: bool = False
    vote_mode: str = "soft"

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ConfigError(f"unknown family {self.family!r}")
        if self.selector not in SELECTORS:
            raise ConfigError(f"unknown selector {self.selector!r}")
        if self.vote_mode not in VOTE_MODES:
            raise ConfigError(f"unknown vote mode {self.vote_mode!r}")
        if self.selector in ("EMC", "QBC") and self.family != "LR":
            raise ConfigError(f"selector {self.selector} requires the LR family")
        if self.plus_online and self.family != "WA":
            raise ConfigError("the online-member variant applies to WA strategies only")

    @property
    def name(self):
        return f"{self.family}_{self.selector}{'+' if self.plus_online else ''}"

    @property
    def uses_hypotheses(self):
        """Whether the strategy consults the candidate set at all."""
        return self.family == "WA" or self.selector == "HSS"

    @property
    def needs_online_fit(self):
        return self.family == "LR" or self.plus_online


def parse_strategy(name, vote_mode="soft"):
    """Parse a canonical strategy name such as ``WA_HSS+`` or ``LR_random``."""
    text = name.strip()
    plus = text.endswith("+")
    if plus:
        text = text[:-1]
    parts = text.split("_", 1)
    if len(parts) != 2:
        raise ConfigError(f"malformed strategy name {name!r}")
    spec = StrategySpec(family=parts[0], selector=parts[1], plus_online=plus,
                        vote_mode=vote_mode)
    if spec.name != name.strip():
        raise ConfigError(f"malformed strategy name {name!r}")
    return spec


@dataclass
class QueryContext:
    """Everything a selector may consult when scoring candidate cells.

    ``hypothesis_set`` and ``posterior`` cover the fused set when an online
    member is in play. ``member_probs`` optionally caches member presence
    probabilities over the whole grid for the leading members of the set,
    with ``online_probs`` holding the row for a fused online member.
    """

    grid: object
    hypothesis_set: object = None
    posterior: object = None
    observations: ObservationLog = field(default_factory=ObservationLog)
    model: object = None
    rng: object = None
    valid_mask: np.ndarray = None
    member_probs: np.ndarray = None
    online_probs: np.ndarray = None
    train_cfg: TrainConfig = field(default_factory=TrainConfig)

    def candidate_mask(self):
        mask = np.ones(self.grid.n_cells, dtype=bool)
        if self.valid_mask is not None:
            mask &= self.valid_mask
        sampled = list(self.observations.sampled())
        if sampled:
            mask[np.array(sampled, dtype=int)] = False
        return mask


def _require_candidates(mask):
    if not mask.any():
        raise ExhaustedError("every valid cell has already been sampled")


def _argmin_masked(scores, mask):
    # np.argmin takes the first minimum, which is the lowest cell id.
    scores = np.where(mask, scores, np.inf)
    return int(np.argmin(scores))


def select_uncertain(model, ctx):
    """Cell whose predicted presence probability is nearest 0.5."""
    mask = ctx.candidate_mask()
    _require_candidates(mask)
    probs = model.predict_many(ctx.grid.features)
    return _argmin_masked(np.abs(0.5 - probs), mask)


def select_positive(model, ctx):
    """Cell with the highest predicted presence probability."""
    mask = ctx.candidate_mask()
    _require_candidates(mask)
    probs = model.predict_many(ctx.grid.features)
    return _argmin_masked(-probs, mask)


def select_random(ctx):
    """Uniformly random unsampled cell, drawn from the context RNG."""
    mask = ctx.candidate_mask()
    _require_candidates(mask)
    candidates = np.flatnonzero(mask)
    return int(candidates[ctx.rng.integers(len(candidates))])


def select_hss(hset, posterior, ctx, vote_mode="soft"):
    """Cell where the posterior-weighted committee is nearest 0.5."""
    mask = ctx.candidate_mask()
    _require_candidates(mask)
    scores = committee_scores(hset, posterior, ctx.grid.features, vote_mode,
                              member_probs=ctx.member_probs,
                              extra_probs=ctx.online_probs)
    return _argmin_masked(np.abs(0.5 - scores), mask)


def expected_change_scores(model, features):
    """Expected gradient length of one more observation at each feature row.

    For a logistic model the label expectation has the closed form
    ``2 p (1 - p) ||x~||`` with ``x~`` the features plus the bias column.
    """
    probs = model.predict_many(features)
    norms = np.sqrt(np.sum(np.asarray(features, dtype=float) ** 2, axis=1) + 1.0)
    return 2.0 * probs * (1.0 - probs) * norms


def select_emc(model, ctx):
    """Cell whose observation would change the model most in expectation."""
    mask = ctx.candidate_mask()
    _require_candidates(mask)
    return _argmin_masked(-expected_change_scores(model, ctx.grid.features), mask)


def leave_one_out_committee(log, grid, cfg):
    """Models refit with one observation dropped, skipping single-class subsets."""
    labels = log.labels()
    models = []
    for drop in range(len(log)):
        rest = [o for i, o in enumerate(log) if i != drop]
        rest_labels = [o.label for o in rest]
        if len(set(rest_labels)) < 2:
            continue
        models.append(fit_logistic(ObservationLog(rest), grid, cfg))
    return models


def select_qbc(log, grid, cfg, ctx):
    """Cell where leave-one-out committee members disagree the most.

    Disagreement is the mean committee probability's distance from 0.5.
    With only the two initial observations every subset is single-class,
    so selection falls back to uncertainty sampling on the full-data model.
    """
    mask = ctx.candidate_mask()
    _require_candidates(mask)
    committee = leave_one_out_committee(log, grid, cfg)
    if not committee:
        model = ctx.model if ctx.model is not None else fit_logistic(log, grid, cfg)
        return select_uncertain(model, ctx)
    mean_probs = np.mean([m.predict_many(ctx.grid.features) for m in committee], axis=0)
    return _argmin_masked(np.abs(0.5 - mean_probs), mask)


def next_query(spec, ctx):
    """Route a strategy to its selector and return the chosen cell id.

    The context must be prepared for the strategy: for WA strategies
    ``ctx.model`` is the posterior-weighted average (over the fused set for
    the plus variants), for LR strategies it is the logistic fit to the
    current log.
    """
    if spec.selector == "random":
        return select_random(ctx)
    if spec.selector == "uncertain":
        return select_uncertain(ctx.model, ctx)
    if spec.selector == "positive":
        return select_positive(ctx.model, ctx)
    if spec.selector == "HSS":
        return select_hss(ctx.hypothesis_set, ctx.posterior, ctx, spec.vote_mode)
    if spec.selector == "EMC":
        return select_emc(ctx.model, ctx)
    if spec.selector == "QBC":
        return select_qbc(ctx.observations, ctx.grid, ctx.train_cfg, ctx)
    raise ConfigError(f"unknown selector {spec.selector!r}")
