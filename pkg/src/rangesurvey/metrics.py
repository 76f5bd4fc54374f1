"""Ranking metrics and per-run traces.

Average precision is computed per species over all valid cells; the mean
across species at each timestep gives the MAP curve, and the running mean
of that curve gives its normalized area (MAP-AUC).
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


def average_precision(scores, labels):
    """Average precision of a scored binary ranking.

    The mean over positives of precision at their ranks, ranking by
    descending score. Equal scores rank in ascending cell-id (input
    position) order so the value is deterministic.
    """
    scores = np.asarray(scores, dtype=float)
    labels = np.asarray(labels)
    if scores.shape != labels.shape or scores.ndim != 1:
        raise ValueError("scores and labels must be aligned vectors")
    if not np.all(np.isfinite(scores)):
        raise ValueError("scores must be finite")
    n_pos = int(np.sum(labels == 1))
    if n_pos == 0:
        raise ValueError("average precision is undefined without positives")
    order = np.argsort(-scores, kind="stable")
    ranked = (labels[order] == 1).astype(float)
    cum_pos = np.cumsum(ranked)
    ranks = np.arange(1, scores.size + 1, dtype=float)
    return float(np.sum((cum_pos / ranks) * ranked) / n_pos)


def model_average_precision(model, grid, gt):
    """AP of a model's presence scores against a species' ground truth."""
    gt.check_grid(grid)
    valid = gt.valid
    scores = model.predict_many(grid.features[valid])
    return average_precision(scores, gt.labels[valid])


@dataclass(frozen=True)
class TraceRecord:
    """One timestep of one run: the query made and the model quality before it."""

    t: int
    cell_id: int
    label: int
    ap: float


@dataclass
class RunTrace:
    """Every timestep of one (strategy, species, seed) run.

    ``records[t].ap`` is measured before the step's query is added, so the
    row at timestep t reflects a model trained on the initial pair plus t
    queried observations.
    """

    strategy: str
    species_label: str
    seed: int
    init_observations: tuple = ()
    records: list = field(default_factory=list)

    def add(self, t, cell_id, label, ap):
        if self.records and t != self.records[-1].t + 1:
            raise ValueError("trace timesteps must increase by 1")
        if not self.records and t != 0:
            raise ValueError("traces start at timestep 0")
        if not 0.0 <= ap <= 1.0:
            raise ValueError("ap must lie in [0, 1]")
        self.records.append(TraceRecord(int(t), int(cell_id), int(label), float(ap)))

    def ap_at(self, t):
        return self.records[t].ap

    @property
    def n_timesteps(self):
        return len(self.records)


def map_at(traces, t):
    """Mean AP across traces at one timestep."""
    traces = list(traces)
    if not traces:
        raise ValueError("map_at needs at least one trace")
    return float(np.mean([trace.ap_at(t) for trace in traces]))


def map_auc(curve, t):
    """Normalized area under a MAP curve: the mean over timesteps 0..t."""
    curve = np.asarray(curve, dtype=float)
    if not 0 <= t < curve.size:
        raise ValueError(f"timestep {t} outside curve of length {curve.size}")
    return float(np.mean(curve[: t + 1]))


@dataclass(frozen=True)
class AggregateCurve:
    """Cross-species, cross-seed summary of one strategy's MAP over time."""

    map_mean: np.ndarray
    map_std: np.ndarray
    map_auc_mean: np.ndarray
    n_species: int
    n_seeds: int
    map_per_seed: np.ndarray = None  # (n_seeds, T), kept for audits

    def __post_init__(self):
        for name in ("map_mean", "map_std", "map_auc_mean"):
            arr = np.asarray(getattr(self, name), dtype=float)
            object.__setattr__(self, name, arr)
        if not (self.map_mean.shape == self.map_std.shape == self.map_auc_mean.shape):
            raise ValueError("aggregate curves must share one length")

    @property
    def n_timesteps(self):
        return int(self.map_mean.size)


def aggregate_traces(traces):
    """Aggregate one strategy's traces into an :class:`AggregateCurve`.

    MAP is the mean AP across species within each seed; the curve reports
    the cross-seed mean and standard deviation, and the running-mean AUC
    averaged across seeds.
    """
    traces = list(traces)
    if not traces:
        raise ValueError("cannot aggregate zero traces")
    n_t = traces[0].n_timesteps
    if any(tr.n_timesteps != n_t for tr in traces):
        raise ValueError("traces must cover the same timesteps")
    seeds = sorted(set(tr.seed for tr in traces))
    species = sorted(set(tr.species_label for tr in traces))
    per_seed = np.empty((len(seeds), n_t))
    for i, seed in enumerate(seeds):
        seed_traces = [tr for tr in traces if tr.seed == seed]
        per_seed[i] = [map_at(seed_traces, t) for t in range(n_t)]
    auc_per_seed = np.cumsum(per_seed, axis=1) / np.arange(1, n_t + 1)
    return AggregateCurve(
        map_mean=per_seed.mean(axis=0),
        map_std=per_seed.std(axis=0),
        map_auc_mean=auc_per_seed.mean(axis=0),
        n_species=len(species),
        n_seeds=len(seeds),
        map_per_seed=per_seed,
    )


RESULTS_HEADER = "strategy,seed,species,t,queried_cell,label,ap"
AGGREGATE_HEADER = "strategy,t,map_mean,map_std,mapauc_mean"


def write_results_csv(traces, path):
    """Write per-timestep rows for every trace, in a stable sort order."""
    ordered = sorted(traces, key=lambda tr: (tr.strategy, tr.seed, tr.species_label))
    with open(path, "w", newline="") as fh:
        fh.write(RESULTS_HEADER + "\n")
        for tr in ordered:
            for rec in tr.records:
                fh.write(f"{tr.strategy},{tr.seed},{tr.species_label},"
                         f"{rec.t},{rec.cell_id},{rec.label},{rec.ap!r}\n")


def write_aggregate_csv(aggregates, path):
    """Write one row per (strategy, timestep); strategies keep given order."""
    with open(path, "w", newline="") as fh:
        fh.write(AGGREGATE_HEADER + "\n")
        for name, curve in aggregates.items():
            for t in range(curve.n_timesteps):
                fh.write(f"{name},{t},{float(curve.map_mean[t])!r},"
                         f"{float(curve.map_std[t])!r},"
                         f"{float(curve.map_auc_mean[t])!r}\n")


def read_aggregate_csv(path):
    """Read an aggregate CSV back into ``{strategy: AggregateCurve}``.

    The seed-level detail is not stored in the file, so ``n_species``,
    ``n_seeds`` and ``map_per_seed`` are not recovered.
    """
    rows = {}
    with open(path) as fh:
        header = fh.readline().strip()
        if header != AGGREGATE_HEADER:
            raise ValueError(f"unexpected aggregate header {header!r}")
        for line in fh:
            line = line.strip()
            if not line:
                continue
            name, t, m, s, a = line.split(",")
            rows.setdefault(name, []).append((int(t), float(m), float(s), float(a)))
    out = {}
    for name, entries in rows.items():
        entries.sort()
        out[name] = AggregateCurve(
            map_mean=np.array([e[1] for e in entries]),
            map_std=np.array([e[2] for e in entries]),
            map_auc_mean=np.array([e[3] for e in entries]),
            n_species=0, n_seeds=0)
    return out
