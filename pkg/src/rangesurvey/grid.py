"""Survey grids: queryable cells on the globe plus their feature vectors.

The world is discretized into cells (a Fibonacci sphere lattice by default,
or externally supplied centroids loaded from files). Every cell carries a
feature vector produced by an encoder; classifiers elsewhere in the package
only ever see those features.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import GenerationError, ParseError

DEFAULT_FEATURE_DIM = 256

TRIG_DIM = 4

# Golden angle in radians, the longitude increment of the sphere lattice.
_GOLDEN_ANGLE = math.pi * (3.0 - math.sqrt(5.0))


def encode_trig(lat, lon):
    """Encode latitude/longitude as [sin, cos] pairs of the scaled angles.

    Returns the 4-vector
    ``[sin(lat*pi/90), cos(lat*pi/90), sin(lon*pi/180), cos(lon*pi/180)]``,
    which is continuous across the date line. Latitude must lie in
    [-90, 90]; longitude is treated as periodic and may be any finite
    value.
    """
    lat = float(lat)
    lon = float(lon)
    if not (math.isfinite(lat) and math.isfinite(lon)):
        raise ValueError(f"coordinates must be finite, got ({lat}, {lon})")
    if not -90.0 <= lat <= 90.0:
        raise ValueError(f"latitude {lat} outside [-90, 90]")
    a = lat * math.pi / 90.0
    b = lon * math.pi / 180.0
    return np.array([math.sin(a), math.cos(a), math.sin(b), math.cos(b)])


def encode_trig_many(lats, lons):
    """Vectorized :func:`encode_trig`; returns an (n, 4) array."""
    lats = np.asarray(lats, dtype=float)
    lons = np.asarray(lons, dtype=float)
    if not (np.all(np.isfinite(lats)) and np.all(np.isfinite(lons))):
        raise ValueError("coordinates must be finite")
    if np.any(lats < -90.0) or np.any(lats > 90.0):
        raise ValueError("latitude outside [-90, 90]")
    a = lats * (math.pi / 90.0)
    b = lons * (math.pi / 180.0)
    return np.stack([np.sin(a), np.cos(a), np.sin(b), np.cos(b)], axis=1)


class TrigEncoder:
    """Pass-through encoder emitting the raw 4-d trigonometric location code."""

    kind = "trig_loc"
    dim = TRIG_DIM

    def encode(self, lat, lon):
        return encode_trig(lat, lon)

    def encode_many(self, lats, lons):
        return encode_trig_many(lats, lons)


class RandomProjectionEncoder:
    """Fixed random multi-layer projection of the trig location code.

    A stand-in for features from an untrained network: two rectified hidden
    layers of width ``dim`` followed by an affine output layer, all weights
    drawn once from a zero-mean Gaussian with scale 1/sqrt(fan_in). The map
    is deterministic per seed.
    """

    kind = "random_projection"

    def __init__(self, seed, dim=DEFAULT_FEATURE_DIM):
        if dim < 1:
            raise ValueError(f"dim must be >= 1, got {dim}")
        self.seed = int(seed)
        self.dim = int(dim)
        rng = np.random.default_rng(self.seed)
        fan_ins = [TRIG_DIM, self.dim, self.dim]
        self.weights = []
        self.biases = []
        for fan_in in fan_ins:
            scale = 1.0 / math.sqrt(fan_in)
            self.weights.append(rng.normal(0.0, scale, size=(self.dim, fan_in)))
            self.biases.append(rng.normal(0.0, scale, size=self.dim))

    def project(self, loc4):
        """Map a single 4-d trig encoding to a ``dim``-d feature vector."""
        loc4 = np.asarray(loc4, dtype=float)
        if loc4.shape != (TRIG_DIM,):
            raise ValueError(f"expected a {TRIG_DIM}-d trig encoding, got shape {loc4.shape}")
        return self.project_many(loc4[None, :])[0]

    def project_many(self, loc4s):
        loc4s = np.asarray(loc4s, dtype=float)
        if loc4s.ndim != 2 or loc4s.shape[1] != TRIG_DIM:
            raise ValueError(f"expected (n, {TRIG_DIM}) trig encodings, got shape {loc4s.shape}")
        h = loc4s
        last = len(self.weights) - 1
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            h = h @ w.T + b
            if i < last:
                h = np.maximum(h, 0.0)
        return h

    def encode(self, lat, lon):
        return self.project(encode_trig(lat, lon))

    def encode_many(self, lats, lons):
        return self.project_many(encode_trig_many(lats, lons))


def encode_random_projection(loc4, encoder):
    """Apply a :class:`RandomProjectionEncoder` to an existing trig encoding."""
    if encoder.kind != "random_projection":
        raise ValueError(f"encoder kind must be random_projection, got {encoder.kind}")
    return encoder.project(loc4)


def make_encoder(kind, seed=0, dim=DEFAULT_FEATURE_DIM):
    if kind == "trig_loc":
        return TrigEncoder()
    if kind == "random_projection":
        return RandomProjectionEncoder(seed=seed, dim=dim)
    raise ValueError(f"unknown encoder kind {kind!r}")


@dataclass(frozen=True)
class Cell:
    """One queryable location: a grid index, its centroid, and its features."""

    id: int
    lat: float
    lon: float
    features: np.ndarray


@dataclass(frozen=True)
class SurveyGrid:
    """The discretized world: cell centroids and their feature matrix.

    Cell ids are implicit row indices (0..n-1). Immutable once built and
    safe to share across worker threads.
    """

    lats: np.ndarray
    lons: np.ndarray
    features: np.ndarray
    provenance: str = "synthetic"

    def __post_init__(self):
        lats = np.asarray(self.lats, dtype=float)
        lons = np.asarray(self.lons, dtype=float)
        feats = np.asarray(self.features, dtype=float)
        object.__setattr__(self, "lats", lats)
        object.__setattr__(self, "lons", lons)
        object.__setattr__(self, "features", feats)
        if lats.size == 0:
            raise ValueError("grid must contain at least one cell")
        if feats.ndim != 2 or feats.shape[0] != lats.size or lons.size != lats.size:
            raise ValueError("lats, lons and features rows must agree")
        if not np.all(np.isfinite(feats)):
            raise ValueError("grid features must be finite")
        pairs = set(zip(lats.tolist(), lons.tolist()))
        if len(pairs) != lats.size:
            raise ValueError("duplicate (lat, lon) cells in grid")

    @property
    def n_cells(self):
        return int(self.lats.size)

    @property
    def feature_dim(self):
        return int(self.features.shape[1])

    def cell(self, cell_id):
        cell_id = int(cell_id)
        if not 0 <= cell_id < self.n_cells:
            raise ValueError(f"cell id {cell_id} outside [0, {self.n_cells})")
        return Cell(cell_id, float(self.lats[cell_id]), float(self.lons[cell_id]),
                    self.features[cell_id])

    @property
    def cells(self):
        return [self.cell(i) for i in range(self.n_cells)]


def fibonacci_lattice(n_cells):
    """Near-equal-area lat/lon placement of ``n_cells`` points on the sphere."""
    if n_cells < 2:
        raise ValueError(f"n_cells must be >= 2, got {n_cells}")
    i = np.arange(n_cells)
    z = 1.0 - 2.0 * (i + 0.5) / n_cells
    lats = np.degrees(np.arcsin(z))
    lons = np.degrees(i * _GOLDEN_ANGLE)
    lons = (lons + 180.0) % 360.0 - 180.0
    return lats, lons


def build_fibonacci_grid(n_cells, encoder, land_mask=None):
    """Build a synthetic grid of ``n_cells`` lattice points.

    ``land_mask`` is an optional ``(lat, lon) -> bool`` predicate; cells it
    rejects are dropped and the survivors take fresh contiguous ids.
    """
    lats, lons = fibonacci_lattice(n_cells)
    if land_mask is not None:
        keep = np.array([bool(land_mask(la, lo)) for la, lo in zip(lats, lons)])
        lats, lons = lats[keep], lons[keep]
        if lats.size == 0:
            raise GenerationError("land mask rejected every lattice point")
    features = encoder.encode_many(lats, lons)
    return SurveyGrid(lats=lats, lons=lons, features=features, provenance="synthetic")


def _parse_float(token, path, line_no, what):
    try:
        value = float(token)
    except ValueError:
        raise ParseError(path, line_no, f"{what} {token!r} is not a number") from None
    if not math.isfinite(value):
        raise ParseError(path, line_no, f"{what} {token!r} is not finite")
    return value


def load_grid(cells_path, features_path):
    """Load a grid from a cell file and a feature file.

    Cell file: header ``id,lat,lon`` then one ``id,lat,lon`` row per cell,
    ids contiguous from 0 in row order. Feature file: one row per cell of
    comma-separated finite reals, all rows the same width, bound to cells
    by row order.
    """
    lats, lons = [], []
    with open(cells_path) as fh:
        header = fh.readline().strip()
        if header.replace(" ", "") != "id,lat,lon":
            raise ParseError(cells_path, 1, f"expected header 'id,lat,lon', got {header!r}")
        for line_no, line in enumerate(fh, start=2):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if len(parts) != 3:
                raise ParseError(cells_path, line_no, f"expected 3 fields, got {len(parts)}")
            cid = parts[0].strip()
            if not cid.isdigit() or int(cid) != len(lats):
                raise ParseError(cells_path, line_no,
                                 f"cell ids must be contiguous from 0, got {cid!r}")
            lat = _parse_float(parts[1], cells_path, line_no, "latitude")
            lon = _parse_float(parts[2], cells_path, line_no, "longitude")
            if not -90.0 <= lat <= 90.0:
                raise ParseError(cells_path, line_no, f"latitude {lat} outside [-90, 90]")
            if not -180.0 <= lon < 180.0:
                raise ParseError(cells_path, line_no, f"longitude {lon} outside [-180, 180)")
            lats.append(lat)
            lons.append(lon)
    if not lats:
        raise ParseError(cells_path, 2, "cell file contains no cells")

    rows = []
    width = None
    with open(features_path) as fh:
        for line_no, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            parts = line.split(",")
            if width is None:
                width = len(parts)
            elif len(parts) != width:
                raise ParseError(features_path, line_no,
                                 f"expected {width} features, got {len(parts)}")
            rows.append([_parse_float(p, features_path, line_no, "feature") for p in parts])
    if len(rows) != len(lats):
        raise ParseError(features_path, len(rows) + 1,
                         f"feature rows ({len(rows)}) do not match cell count ({len(lats)})")
    return SurveyGrid(lats=np.array(lats), lons=np.array(lons),
                      features=np.array(rows), provenance="loaded")


def save_grid(grid, cells_path, features_path):
    """Write a grid back out in the :func:`load_grid` file formats."""
    with open(cells_path, "w") as fh:
        fh.write("id,lat,lon\n")
        for i in range(grid.n_cells):
            fh.write(f"{i},{float(grid.lats[i])!r},{float(grid.lons[i])!r}\n")
    with open(features_path, "w") as fh:
        for row in grid.features:
            fh.write(",".join(repr(v) for v in row.tolist()) + "\n")
