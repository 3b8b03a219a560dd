"""Synthetic terrain environment: ground-truth semantics, per-cell features,
and a downward-facing camera producing square footprint patches.

The terrain is a flat 2D grid (one cell per captured pixel). Each cell carries
a class id and a feature vector drawn from its class-conditional Gaussian, so
a probabilistic classifier can be trained and scored against the raster.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np


class GridBounds(NamedTuple):
    """Grid extent shared by worlds and maps (cells are square)."""

    width_cells: int
    height_cells: int
    cell_size: float

    @property
    def width_m(self) -> float:
        return self.width_cells * self.cell_size

    @property
    def height_m(self) -> float:
        return self.height_cells * self.cell_size


@dataclass(frozen=True)
class Pose:
    """Planar robot pose in meters at fixed altitude."""

    x: float
    y: float

    def distance_to(self, other: "Pose") -> float:
        return float(np.hypot(self.x - other.x, self.y - other.y))


@dataclass
class SemanticGridWorld:
    """Ground-truth class raster plus per-cell latent feature vectors.

    Immutable after construction; safe for concurrent reads.

    Attributes:
        width_cells: grid width (columns).
        height_cells: grid height (rows).
        cell_size: meters per cell edge.
        num_classes: number of semantic classes K.
        labels: (height, width) int array of class ids in [0, K).
        features: (height, width, d) float array of per-cell features.
    """

    width_cells: int
    height_cells: int
    cell_size: float
    num_classes: int
    labels: np.ndarray
    features: np.ndarray

    def __post_init__(self):
        if self.cell_size <= 0:
            raise ValueError("cell_size must be positive")
        if self.num_classes < 2:
            raise ValueError("num_classes must be at least 2")
        if self.labels.shape != (self.height_cells, self.width_cells):
            raise ValueError("labels raster does not match declared dimensions")
        if self.features.shape[:2] != self.labels.shape:
            raise ValueError("features raster does not match labels raster")
        if self.features.ndim != 3 or self.features.shape[2] < 1:
            raise ValueError("features must be (height, width, d) with d >= 1")
        if self.labels.min() < 0 or self.labels.max() >= self.num_classes:
            raise ValueError("labels must lie in [0, num_classes)")
        self.labels.setflags(write=False)
        self.features.setflags(write=False)

    @property
    def bounds(self) -> GridBounds:
        return GridBounds(self.width_cells, self.height_cells, self.cell_size)

    @property
    def feature_dim(self) -> int:
        return self.features.shape[2]


@dataclass
class RawImage:
    """A captured footprint patch: exact copy of the world region it covers."""

    origin_cell: tuple[int, int]
    side_cells: int
    gt_patch: np.ndarray
    feature_patch: np.ndarray


def class_means(num_classes: int, separation: float, feature_dim: int | None = None) -> np.ndarray:
    """Class mean vectors at mutually equal pairwise distance `separation`.

    Means are scaled one-hot axes (a simplex corner arrangement), which keeps
    the pairwise distances exact. Requires feature_dim >= num_classes.
    """
    d = num_classes if feature_dim is None else feature_dim
    if d < num_classes:
        raise ValueError("feature_dim must be >= num_classes for simplex placement")
    means = np.zeros((num_classes, d))
    scale = separation / np.sqrt(2.0)
    means[:, :num_classes] = scale * np.eye(num_classes)
    return means


def generate_world(
    seed: int,
    width_cells: int,
    height_cells: int,
    num_classes: int,
    blob_scale: int,
    cell_size: float = 1.0,
    feature_dim: int | None = None,
    noise_sigma: float = 1.0,
    class_separation: float = 4.0,
) -> SemanticGridWorld:
    """Generate a blobby synthetic terrain, deterministically from the seed.

    Labels are grown from seeded random class seeds by nearest-seed
    assignment, giving contiguous class regions of roughly `blob_scale`
    cells across. Each cell's feature is its class mean plus isotropic
    Gaussian noise of scale `noise_sigma`; class means sit at pairwise
    distance `class_separation`, so separation / sigma is the difficulty knob.
    """
    if width_cells < 16 or height_cells < 16:
        raise ValueError("world dimensions must be at least 16 cells")
    if num_classes < 2:
        raise ValueError("num_classes must be at least 2")
    if blob_scale < 1:
        raise ValueError("blob_scale must be at least 1")
    if noise_sigma < 0:
        raise ValueError("noise_sigma must be nonnegative")

    rng = np.random.default_rng(seed)
    n_seeds = max(num_classes, int(round(width_cells * height_cells / blob_scale**2)))
    seed_rows = rng.integers(0, height_cells, n_seeds)
    seed_cols = rng.integers(0, width_cells, n_seeds)
    # First K seeds take classes 0..K-1 so every class owns at least one blob.
    seed_classes = np.concatenate(
        [np.arange(num_classes), rng.integers(0, num_classes, n_seeds - num_classes)]
    )

    rows = np.arange(height_cells)[:, None]
    cols = np.arange(width_cells)[None, :]
    nearest = np.zeros((height_cells, width_cells), dtype=np.int64)
    best = np.full((height_cells, width_cells), np.inf)
    for i in range(n_seeds):  # chunked argmin keeps memory flat for many seeds
        d2 = (rows - seed_rows[i]) ** 2 + (cols - seed_cols[i]) ** 2
        closer = d2 < best
        nearest[closer] = i
        best[closer] = d2[closer]
    labels = seed_classes[nearest].astype(np.int64)

    means = class_means(num_classes, class_separation, feature_dim)
    eps = rng.standard_normal((height_cells, width_cells, means.shape[1]))
    features = means[labels] + noise_sigma * eps

    return SemanticGridWorld(
        width_cells=width_cells,
        height_cells=height_cells,
        cell_size=cell_size,
        num_classes=num_classes,
        labels=labels,
        features=features,
    )


def world_from_labels(
    labels: np.ndarray,
    seed: int,
    num_classes: int | None = None,
    cell_size: float = 1.0,
    feature_dim: int | None = None,
    noise_sigma: float = 1.0,
    class_separation: float = 4.0,
) -> SemanticGridWorld:
    """Build a world from an externally loaded label raster.

    Features are synthesized from the labels with the given seed, using the
    same class-conditional Gaussian model as generate_world.
    """
    labels = np.asarray(labels, dtype=np.int64)
    if labels.ndim != 2:
        raise ValueError("label raster must be 2-D")
    k = int(labels.max()) + 1 if num_classes is None else num_classes
    if k < 2:
        raise ValueError("raster must contain at least 2 classes")
    if labels.min() < 0 or labels.max() >= k:
        raise ValueError("raster labels must lie in [0, num_classes)")
    rng = np.random.default_rng(seed)
    means = class_means(k, class_separation, feature_dim)
    features = means[labels] + noise_sigma * rng.standard_normal(labels.shape + (means.shape[1],))
    return SemanticGridWorld(
        width_cells=labels.shape[1],
        height_cells=labels.shape[0],
        cell_size=cell_size,
        num_classes=k,
        labels=labels,
        features=features,
    )


def clamp_pose(pose: Pose, side_cells: int, bounds: GridBounds) -> Pose:
    """Clamp a pose so its footprint lies fully inside the world."""
    half = side_cells * bounds.cell_size / 2.0
    x = min(max(pose.x, half), bounds.width_m - half)
    y = min(max(pose.y, half), bounds.height_m - half)
    return Pose(x, y)


def footprint_origin(pose: Pose, side_cells: int, bounds: GridBounds) -> tuple[int, int]:
    """Top-left cell (row, col) of the footprint centered at the pose.

    The pose is clamped into the valid region first; origin = center cell
    minus side/2 (integer floor), then clamped so the patch stays in bounds.
    """
    if side_cells > bounds.width_cells or side_cells > bounds.height_cells:
        raise ValueError("footprint side exceeds world dimensions")
    p = clamp_pose(pose, side_cells, bounds)
    col = min(int(p.x / bounds.cell_size), bounds.width_cells - 1)
    row = min(int(p.y / bounds.cell_size), bounds.height_cells - 1)
    r0 = min(max(row - side_cells // 2, 0), bounds.height_cells - side_cells)
    c0 = min(max(col - side_cells // 2, 0), bounds.width_cells - side_cells)
    return r0, c0


def footprint_cells(origin: tuple[int, int], side_cells: int) -> np.ndarray:
    """All (row, col) cells of a footprint, row-major, as an (f*f, 2) array."""
    r0, c0 = origin
    rr, cc = np.meshgrid(
        np.arange(r0, r0 + side_cells), np.arange(c0, c0 + side_cells), indexing="ij"
    )
    return np.stack([rr.ravel(), cc.ravel()], axis=1)


def visible_cells(pose: Pose, side_cells: int, bounds: GridBounds) -> set[tuple[int, int]]:
    """Set of cells visible from a pose (the camera footprint)."""
    origin = footprint_origin(pose, side_cells, bounds)
    return {(int(r), int(c)) for r, c in footprint_cells(origin, side_cells)}


def capture(world: SemanticGridWorld, pose: Pose, side_cells: int) -> RawImage:
    """Image the footprint at the (clamped) pose.

    Returns exact copies of the ground-truth labels and features for the
    side_cells x side_cells patch whose center cell contains the pose.
    """
    r0, c0 = footprint_origin(pose, side_cells, world.bounds)
    gt = world.labels[r0 : r0 + side_cells, c0 : c0 + side_cells].copy()
    feats = world.features[r0 : r0 + side_cells, c0 : c0 + side_cells].copy()
    return RawImage(origin_cell=(r0, c0), side_cells=side_cells, gt_patch=gt, feature_patch=feats)
