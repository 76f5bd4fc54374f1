"""Config-driven experiment runner.

Runs every (strategy, species, seed) combination through the survey loop:
fit or average the model, record its quality, pick a cell, ask the oracle,
append the answer. Timestep t's recorded AP reflects the model trained on
the initial pair plus t queried observations; the t=0 row is the
init-only model, before any active query has been incorporated.

Runs are independent and may execute on a thread pool; every random choice
comes from a stream derived from (master seed, species, seed, purpose), so
results are byte-identical regardless of scheduling.
"""

from __future__ import annotations

import logging
import zlib
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .charts import emit_charts
from .errors import ConfigError
from .grid import load_grid
from .hypotheses import (ObservationLog, PosteriorState, load_hypotheses,
                         member_probabilities, update_posterior)
from .learner import TrainConfig, fit_logistic, fuse_online, weighted_average_model
from .metrics import (RunTrace, aggregate_traces, model_average_precision,
                      write_aggregate_csv, write_results_csv)
from .oracle import NoiseModel, init_observations, load_ground_truth, query_label
from .strategies import QueryContext, next_query, parse_strategy
from .synth import SynthConfig, build_synthetic_world, gen_test_species

log = logging.getLogger(__name__)

# Purpose tags for derived RNG streams.
_STREAM_SPECIES = 101
_STREAM_INIT = 202
_STREAM_NOISE = 303
_STREAM_SELECT = 404
_STREAM_SUBSET = 505


@dataclass(frozen=True)
class WorldConfig:
    """Where the world comes from: synthesized or loaded from files."""

    source: str = "synth"
    synth: SynthConfig = field(default_factory=SynthConfig)
    cells_path: str = None
    features_path: str = None
    hypotheses_path: str = None
    ground_truth_paths: tuple = ()

    def __post_init__(self):
        if self.source not in ("synth", "files"):
            raise ConfigError(f"world source must be synth or files, got {self.source!r}")
        if self.source == "files":
            missing = [name for name in ("cells_path", "features_path", "hypotheses_path")
                       if getattr(self, name) is None]
            if missing or not self.ground_truth_paths:
                raise ConfigError("file worlds need cell, feature, hypothesis and "
                                  "ground-truth paths")


@dataclass(frozen=True)
class ExperimentConfig:
    """One experiment: a world, the strategies to race, and run counts."""

    world: WorldConfig = field(default_factory=WorldConfig)
    strategies: tuple = ("WA_HSS+", "WA_HSS", "WA_random", "LR_uncertain")
    n_species: int = 10
    n_seeds: int = 3
    n_timesteps: int = 50
    noise_rate: float = 0.0
    hypothesis_subset: int = None
    vote_mode: str = "soft"
    weighting: str = "posterior"
    plus_report: str = "average"
    exclude_generator: bool = False
    master_seed: int = 0
    threads: int = 1
    out_dir: str = None
    train: TrainConfig = field(default_factory=TrainConfig)

    def __post_init__(self):
        object.__setattr__(self, "strategies", tuple(self.strategies))
        if not self.strategies:
            raise ConfigError("at least one strategy is required")
        for name in self.strategies:
            parse_strategy(name, self.vote_mode)
        if self.n_seeds < 1 or self.n_timesteps < 1 or self.n_species < 1:
            raise ConfigError("n_species, n_seeds and n_timesteps must be >= 1")
        if not 0.0 <= self.noise_rate <= 1.0:
            raise ConfigError("noise_rate must lie in [0, 1]")
        if self.weighting not in ("posterior", "uniform"):
            raise ConfigError(f"weighting must be posterior or uniform, got {self.weighting!r}")
        if self.plus_report not in ("average", "online"):
            raise ConfigError(f"plus_report must be average or online, got {self.plus_report!r}")
        if self.vote_mode not in ("soft", "hard"):
            raise ConfigError(f"vote_mode must be soft or hard, got {self.vote_mode!r}")
        if self.threads < 1:
            raise ConfigError("threads must be >= 1")
        if self.hypothesis_subset is not None and self.hypothesis_subset < 1:
            raise ConfigError("hypothesis_subset must be >= 1")


def _unknown_keys(d, allowed, where):
    extra = set(d) - set(allowed)
    if extra:
        raise ConfigError(f"unknown {where} keys: {sorted(extra)}")


def config_from_dict(raw):
    """Build an :class:`ExperimentConfig` from a parsed config mapping."""
    raw = dict(raw or {})
    world_raw = dict(raw.pop("world", {}))
    synth_keys = {f for f in SynthConfig.__dataclass_fields__}
    world_keys = {"source", "cells_path", "features_path", "hypotheses_path",
                  "ground_truth_paths"}
    _unknown_keys(world_raw, synth_keys | world_keys, "world")
    synth_raw = {k: world_raw.pop(k) for k in list(world_raw) if k in synth_keys}
    gt_paths = tuple(world_raw.pop("ground_truth_paths", ()) or ())
    world = WorldConfig(synth=SynthConfig(**synth_raw),
                        ground_truth_paths=gt_paths, **world_raw)
    train_raw = dict(raw.pop("train", {}))
    _unknown_keys(train_raw, TrainConfig.__dataclass_fields__, "train")
    train = TrainConfig(**train_raw)
    _unknown_keys(raw, set(ExperimentConfig.__dataclass_fields__) - {"world", "train"},
                  "experiment")
    try:
        return ExperimentConfig(world=world, train=train, **raw)
    except TypeError as exc:
        raise ConfigError(str(exc)) from None


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    traces: list
    aggregates: dict  # strategy name -> AggregateCurve
    aborted: list     # (strategy, species_label, seed, reason)

    @property
    def ok(self):
        return not self.aborted


def _rng(*parts):
    return np.random.default_rng([int(p) & 0xFFFFFFFF for p in parts])


def _strategy_tag(name):
    return zlib.crc32(name.encode())


def _build_world(cfg):
    world = cfg.world
    if world.source == "synth":
        grid, hset = build_synthetic_world(world.synth)
    else:
        grid = load_grid(world.cells_path, world.features_path)
        hset = load_hypotheses(world.hypotheses_path)
        if hset.feature_dim != grid.feature_dim:
            raise ConfigError(
                f"hypothesis dimension {hset.feature_dim} does not match grid "
                f"features {grid.feature_dim}")
    if cfg.hypothesis_subset is not None:
        if cfg.hypothesis_subset > len(hset):
            raise ConfigError(
                f"hypothesis_subset {cfg.hypothesis_subset} exceeds set size {len(hset)}")
        rng = _rng(cfg.master_seed, _STREAM_SUBSET)
        keep = np.sort(rng.choice(len(hset), size=cfg.hypothesis_subset, replace=False))
        hset = hset.subset(keep)
    return grid, hset


def _build_species(cfg, grid, hset):
    world = cfg.world
    if world.source == "files":
        species = []
        for i, path in enumerate(world.ground_truth_paths):
            gt = load_ground_truth(path, species_label=f"sp{i:03d}")
            gt.check_grid(grid)
            species.append(gt)
        return species
    synth = world.synth
    species = []
    for i in range(cfg.n_species):
        rng = _rng(cfg.master_seed, _STREAM_SPECIES, i)
        species.append(gen_test_species(synth, hset, grid, rng, label=f"sp{i:03d}"))
    return species


def _species_view(cfg, hset, member_probs, gt):
    """The candidate set a run is allowed to see for one species."""
    if cfg.exclude_generator and gt.source_members:
        delivered = hset.without(gt.source_members)
        keep = [k for k in range(len(hset)) if k not in set(gt.source_members)]
        probs = member_probs[keep] if member_probs is not None else None
        return delivered, probs
    return hset, member_probs


def run_single(spec, grid, hset, gt, init_pair, cfg, member_probs=None,
               noise_seed=0, select_seed=0, seed_index=0):
    """Run one (strategy, species, seed) survey and return its trace."""
    obs = ObservationLog.from_pairs(init_pair)
    noise = NoiseModel(cfg.noise_rate, seed=noise_seed)
    rng = np.random.default_rng(select_seed)
    trace = RunTrace(strategy=spec.name, species_label=gt.species_label,
                     seed=seed_index, init_observations=tuple(init_pair))
    uses_h = spec.uses_hypotheses
    for t in range(cfg.n_timesteps):
        online = fit_logistic(obs, grid, cfg.train) if spec.needs_online_fit else None
        eff_set = posterior = None
        online_probs = None
        eff_probs = member_probs if uses_h else None
        if uses_h:
            eff_set = hset
            if spec.plus_online:
                eff_set = fuse_online(hset, online)
                if eff_probs is not None:
                    online_probs = online.predict_many(grid.features)[None, :]
            if cfg.weighting == "uniform":
                posterior = PosteriorState.uniform(len(eff_set))
            else:
                posterior = update_posterior(eff_set, obs, grid)
        if spec.family == "WA":
            if spec.plus_online and cfg.plus_report == "online":
                model = online
            else:
                model = weighted_average_model(eff_set, posterior)
        else:
            model = online
        ap = model_average_precision(model, grid, gt)
        ctx = QueryContext(grid=grid, hypothesis_set=eff_set, posterior=posterior,
                           observations=obs, model=model, rng=rng,
                           valid_mask=gt.valid, member_probs=eff_probs,
                           online_probs=online_probs, train_cfg=cfg.train)
        cell = next_query(spec, ctx)
        label = query_label(gt, noise, cell)
        obs.append(cell, label)
        trace.add(t, cell, label, ap)
    return trace


def run_experiment(cfg):
    """Run a whole experiment and (optionally) write its output files.

    Any error inside one run aborts that (strategy, species, seed)
    combination with a logged reason; remaining runs still execute.
    """
    specs = [parse_strategy(name, cfg.vote_mode) for name in cfg.strategies]
    grid, hset = _build_world(cfg)
    species = _build_species(cfg, grid, hset)

    needs_probs = any(s.uses_hypotheses for s in specs)
    member_probs = member_probabilities(hset, grid.features) if needs_probs else None

    views = [_species_view(cfg, hset, member_probs, gt) for gt in species]
    init_pairs = {}
    for i, gt in enumerate(species):
        for seed in range(cfg.n_seeds):
            pair_log = init_observations(gt, grid, _rng(cfg.master_seed, _STREAM_INIT, i, seed))
            init_pairs[(i, seed)] = tuple((o.cell_id, o.label) for o in pair_log)

    jobs = []
    for spec in specs:
        tag = _strategy_tag(spec.name)
        for i, gt in enumerate(species):
            view_set, view_probs = views[i]
            for seed in range(cfg.n_seeds):
                jobs.append((spec, view_set, view_probs, gt, i, seed, tag))

    def _execute(job):
        spec, view_set, view_probs, gt, i, seed, tag = job
        noise_seed = [cfg.master_seed & 0xFFFFFFFF, _STREAM_NOISE, i, seed]
        select_seed = [cfg.master_seed & 0xFFFFFFFF, _STREAM_SELECT, tag, i, seed]
        return run_single(spec, grid, view_set, gt, init_pairs[(i, seed)], cfg,
                          member_probs=view_probs, noise_seed=noise_seed,
                          select_seed=select_seed, seed_index=seed)

    traces = []
    aborted = []
    if cfg.threads > 1:
        with ThreadPoolExecutor(max_workers=cfg.threads) as pool:
            futures = [pool.submit(_execute, job) for job in jobs]
            outcomes = []
            for fut, job in zip(futures, jobs):
                try:
                    outcomes.append(fut.result())
                except Exception as exc:  # noqa: BLE001 - isolate bad runs
                    outcomes.append((job, exc))
    else:
        outcomes = []
        for job in jobs:
            try:
                outcomes.append(_execute(job))
            except Exception as exc:  # noqa: BLE001 - isolate bad runs
                outcomes.append((job, exc))
    for outcome in outcomes:
        if isinstance(outcome, RunTrace):
            traces.append(outcome)
        else:
            job, exc = outcome
            spec, _, _, gt, _, seed, _ = job
            log.warning("run aborted: strategy=%s species=%s seed=%d: %s",
                        spec.name, gt.species_label, seed, exc)
            aborted.append((spec.name, gt.species_label, seed, str(exc)))

    aggregates = {}
    for spec in specs:
        own = [tr for tr in traces if tr.strategy == spec.name]
        if own:
            aggregates[spec.name] = aggregate_traces(own)
        else:
            log.warning("strategy %s produced no completed runs", spec.name)

    result = ExperimentResult(config=cfg, traces=traces, aggregates=aggregates,
                              aborted=aborted)
    if cfg.out_dir is not None:
        write_outputs(result, cfg.out_dir)
    return result


def write_outputs(result, out_dir):
    """Write results.csv, aggregates.csv and the MAP chart into ``out_dir``."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    write_results_csv(result.traces, out / "results.csv")
    write_aggregate_csv(result.aggregates, out / "aggregates.csv")
    emit_charts(result.aggregates, out / "map_curves.svg")
    return out
