"""The simulated observer: answers presence/absence queries per cell.

True absences are always reported faithfully. True presences can be missed
with a configurable probability, modeling an observer who fails to detect
a species that is actually there. False positives never occur.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import GenerationError, ParseError
from .hypotheses import ObservationLog


@dataclass(frozen=True)
class GroundTruth:
    """True per-cell presence labels for one species.

    ``valid`` optionally restricts which cells can be sampled or evaluated.
    ``source_members`` records the candidate indices a synthetic species
    was built from, for diagnostics and generator exclusion.
    """

    labels: np.ndarray
    species_label: str = "species"
    valid: np.ndarray = None
    source_members: tuple = ()

    def __post_init__(self):
        labels = np.asarray(self.labels, dtype=int)
        object.__setattr__(self, "labels", labels)
        if labels.ndim != 1 or labels.size == 0:
            raise ValueError("labels must be a non-empty vector")
        if not np.isin(labels, (0, 1)).all():
            raise ValueError("labels must be binary")
        valid = self.valid
        if valid is None:
            valid = np.ones(labels.size, dtype=bool)
        else:
            valid = np.asarray(valid, dtype=bool)
            if valid.shape != labels.shape:
                raise ValueError("validity mask must align with labels")
        object.__setattr__(self, "valid", valid)
        visible = labels[valid]
        if visible.size == 0 or visible.min() == visible.max():
            raise GenerationError(
                f"ground truth for {self.species_label!r} needs both classes "
                "among valid cells")

    @property
    def n_cells(self):
        return int(self.labels.size)

    def check_grid(self, grid):
        if self.n_cells != grid.n_cells:
            raise ValueError(
                f"ground truth covers {self.n_cells} cells, grid has {grid.n_cells}")


@dataclass
class NoiseModel:
    """False-negative observation noise with its own RNG stream."""

    false_negative_rate: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.false_negative_rate <= 1.0:
            raise ValueError("false_negative_rate must lie in [0, 1]")
        self.rng = np.random.default_rng(self.seed)


def query_label(gt, noise, cell_id):
    """Observe one cell: the true label, with presences possibly missed.

    Each presence query consumes one draw from the noise RNG; absences
    never do, so a zero-noise oracle is a pure function of the cell.
    """
    cell_id = int(cell_id)
    if not 0 <= cell_id < gt.n_cells:
        raise ValueError(f"cell id {cell_id} outside [0, {gt.n_cells})")
    truth = int(gt.labels[cell_id])
    if truth == 0:
        return 0
    if noise.false_negative_rate > 0.0 and noise.rng.random() < noise.false_negative_rate:
        return 0
    return 1


def init_observations(gt, grid, rng):
    """Draw the initial labelled pair: one true presence, one true absence.

    Both cells are chosen uniformly among valid cells of their class and
    labelled without noise. The presence draw consumes the RNG first.
    """
    gt.check_grid(grid)
    presences = np.flatnonzero((gt.labels == 1) & gt.valid)
    absences = np.flatnonzero((gt.labels == 0) & gt.valid)
    if presences.size == 0 or absences.size == 0:
        raise GenerationError("initial sampling needs both classes among valid cells")
    log = ObservationLog()
    log.append(int(presences[rng.integers(presences.size)]), 1)
    log.append(int(absences[rng.integers(absences.size)]), 0)
    return log


def load_ground_truth(path, species_label=None):
    """Read a ground-truth file: ``cell_id,label[,valid]`` rows, one per cell."""
    labels = {}
    valids = {}
    with open(path) as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) not in (2, 3):
                raise ParseError(path, line_no, f"expected 2 or 3 fields, got {len(parts)}")
            try:
                cid = int(parts[0])
                label = int(parts[1])
                valid = int(parts[2]) if len(parts) == 3 else 1
            except ValueError:
                raise ParseError(path, line_no, f"bad integer in {line!r}") from None
            if label not in (0, 1) or valid not in (0, 1):
                raise ParseError(path, line_no, "label and valid must be 0 or 1")
            if cid in labels:
                raise ParseError(path, line_no, f"duplicate cell id {cid}")
            labels[cid] = label
            valids[cid] = valid
    n = len(labels)
    if n == 0:
        raise ParseError(path, 1, "ground-truth file contains no rows")
    if set(labels) != set(range(n)):
        missing = min(set(range(n)) - set(labels))
        raise ParseError(path, n, f"cell ids must cover 0..{n - 1}; missing {missing}")
    if species_label is None:
        species_label = str(path)
    return GroundTruth(labels=np.array([labels[i] for i in range(n)]),
                       species_label=species_label,
                       valid=np.array([valids[i] for i in range(n)], dtype=bool))


def save_ground_truth(gt, path):
    with open(path, "w") as fh:
        for i in range(gt.n_cells):
            fh.write(f"{i},{int(gt.labels[i])},{int(gt.valid[i])}\n")
