"""Probabilistic multi-layer environment map.

Three aligned rasters over the terrain grid: per-class log-odds semantic
layers fused by occupancy-grid updates, a model-uncertainty layer holding the
running mean of observed uncertainties, and a count layer tracking how often
each cell appeared in human-labelled training footprints. An explicit
explored mask gives planners a crisp known/unknown predicate.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from pathlib import Path as FilePath

import numpy as np

from .learner import SurrogateModel, predict
from .world import GridBounds, Pose, footprint_cells, footprint_origin

PROB_CLAMP = 1e-4
# Wide enough that it cannot bind within any realistic observation run while
# still keeping the log-odds finite.
LOGODDS_CLAMP = 600.0


def log_odds(p: np.ndarray | float) -> np.ndarray | float:
    return np.log(p) - np.log1p(-np.asarray(p, dtype=np.float64))


def sigmoid(L: np.ndarray | float) -> np.ndarray:
    """Numerically stable logistic, exact at extreme log-odds."""
    L = np.asarray(L, dtype=np.float64)
    out = np.empty_like(L)
    pos = L >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-L[pos]))
    e = np.exp(L[~pos])
    out[~pos] = e / (1.0 + e)
    return out


@dataclass
class StoredObservation:
    """One captured image kept for post-retraining map replay."""

    pose: Pose
    origin_cell: tuple[int, int]
    feature_patch: np.ndarray
    mission_index: int

    @property
    def side_cells(self) -> int:
        return self.feature_patch.shape[0]


@dataclass(frozen=True)
class MapSnapshot:
    """Immutable planner view of the map state at replan time."""

    uncertainty_mean: np.ndarray
    explored: np.ndarray
    train_counts: np.ndarray
    bounds: GridBounds


@dataclass
class MultiLayerMap:
    """K semantic log-odds layers, uncertainty running mean, training counts.

    Log-odds are stored relative to the uniform class prior p0 = 1/K: a fresh
    cell holds zeros in every layer, and the per-layer Bayes posterior is
    sigmoid(L_prior + L_stored).
    """

    bounds: GridBounds
    num_classes: int
    semantic_logodds: np.ndarray = field(init=False)
    uncertainty_sum: np.ndarray = field(init=False)
    uncertainty_count: np.ndarray = field(init=False)
    train_counts: np.ndarray = field(init=False)
    explored: np.ndarray = field(init=False)

    def __post_init__(self):
        if self.num_classes < 2:
            raise ValueError("map needs at least 2 class layers")
        h, w = self.bounds.height_cells, self.bounds.width_cells
        self.semantic_logodds = np.zeros((self.num_classes, h, w))
        self.uncertainty_sum = np.zeros((h, w))
        self.uncertainty_count = np.zeros((h, w), dtype=np.int64)
        self.train_counts = np.zeros((h, w), dtype=np.int64)
        self.explored = np.zeros((h, w), dtype=bool)

    @property
    def prior_logodds(self) -> float:
        p0 = 1.0 / self.num_classes
        return float(np.log(p0) - np.log1p(-p0))

    @property
    def uncertainty_mean(self) -> np.ndarray:
        out = np.zeros_like(self.uncertainty_sum)
        seen = self.uncertainty_count > 0
        out[seen] = self.uncertainty_sum[seen] / self.uncertainty_count[seen]
        return out

    def class_posteriors(self) -> np.ndarray:
        """(K, H, W) per-layer Bayes posteriors, prior included."""
        return sigmoid(self.prior_logodds + self.semantic_logodds)

    def snapshot(self) -> MapSnapshot:
        return MapSnapshot(
            uncertainty_mean=self.uncertainty_mean,
            explored=self.explored.copy(),
            train_counts=self.train_counts.copy(),
            bounds=self.bounds,
        )


def _split_cells(cells: np.ndarray, grid_map: MultiLayerMap) -> tuple[np.ndarray, np.ndarray]:
    cells = np.asarray(cells, dtype=np.int64)
    if cells.ndim != 2 or cells.shape[1] != 2:
        raise ValueError("cells must be an (n, 2) array of (row, col)")
    if cells.size and (
        cells.min() < 0
        or cells[:, 0].max() >= grid_map.bounds.height_cells
        or cells[:, 1].max() >= grid_map.bounds.width_cells
    ):
        raise ValueError("cell outside map bounds")
    return cells[:, 0], cells[:, 1]


def update_semantic(grid_map: MultiLayerMap, cells: np.ndarray, prob_patch: np.ndarray) -> None:
    """Occupancy-grid update of the semantic layers from one observation.

    prob_patch row i is the K-simplex predicted for cells[i]. Each layer adds
    ln(p/(1-p)) - L_prior with probabilities clamped away from 0 and 1;
    observing exactly the prior leaves the layer unchanged. Marks the cells
    explored.
    """
    rows, cols = _split_cells(cells, grid_map)
    probs = np.asarray(prob_patch, dtype=np.float64)
    if probs.shape != (rows.size, grid_map.num_classes):
        raise ValueError("probability patch misaligned with cells")
    probs = np.clip(probs, PROB_CLAMP, 1.0 - PROB_CLAMP)
    delta = (log_odds(probs) - grid_map.prior_logodds).T  # (K, n)
    updated = grid_map.semantic_logodds[:, rows, cols] + delta
    grid_map.semantic_logodds[:, rows, cols] = np.clip(updated, -LOGODDS_CLAMP, LOGODDS_CLAMP)
    grid_map.explored[rows, cols] = True


def update_uncertainty(grid_map: MultiLayerMap, cells: np.ndarray, values: np.ndarray) -> None:
    """Fold new uncertainty observations into the per-cell running mean."""
    rows, cols = _split_cells(cells, grid_map)
    vals = np.asarray(values, dtype=np.float64).ravel()
    if vals.size != rows.size:
        raise ValueError("uncertainty patch misaligned with cells")
    if vals.min() < 0.0 or vals.max() > 1.0:
        raise ValueError("uncertainty values must lie in [0, 1]")
    grid_map.uncertainty_sum[rows, cols] += vals
    grid_map.uncertainty_count[rows, cols] += 1


def increment_counts(grid_map: MultiLayerMap, cells: np.ndarray) -> None:
    """Record one human-labelled footprint: +1 on every covered cell."""
    rows, cols = _split_cells(cells, grid_map)
    grid_map.train_counts[rows, cols] += 1


def ml_semantics(grid_map: MultiLayerMap) -> tuple[np.ndarray, np.ndarray]:
    """Maximum-likelihood class per cell with its posterior probability.

    Ties go to the lowest class id (numpy argmax order). Unexplored cells are
    flagged invalid with class -1 and probability 0.
    """
    posts = grid_map.class_posteriors()
    classes = np.argmax(posts, axis=0).astype(np.int64)
    best = np.take_along_axis(posts, classes[None], axis=0)[0]
    classes[~grid_map.explored] = -1
    best[~grid_map.explored] = 0.0
    return classes, best


def render_pseudo_patch(
    grid_map: MultiLayerMap, pose: Pose, side_cells: int
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Render ML pseudo labels and uncertainties for a footprint.

    Returns (label_patch, uncertainty_patch, valid_mask); the mask is False
    exactly on unexplored cells, where the labels carry no information.
    """
    r0, c0 = footprint_origin(pose, side_cells, grid_map.bounds)
    window = (slice(r0, r0 + side_cells), slice(c0, c0 + side_cells))
    classes, _ = ml_semantics(grid_map)
    return (
        classes[window].copy(),
        grid_map.uncertainty_mean[window],
        grid_map.explored[window].copy(),
    )


def recompute(
    observations: list[StoredObservation],
    model: SurrogateModel,
    bounds: GridBounds,
    num_classes: int,
    train_counts: np.ndarray | None = None,
) -> MultiLayerMap:
    """Rebuild the map by replaying stored images through a retrained model.

    Observations replay in their original order. Training counts reflect the
    labelling history, not model predictions, so they are carried over from
    the previous map rather than recomputed.
    """
    fresh = MultiLayerMap(bounds=bounds, num_classes=num_classes)
    if train_counts is not None:
        fresh.train_counts = np.array(train_counts, dtype=np.int64, copy=True)
    for obs in observations:
        f = obs.side_cells
        cells = footprint_cells(obs.origin_cell, f)
        probs, unc = predict(model, obs.feature_patch)
        update_semantic(fresh, cells, probs.reshape(-1, num_classes))
        update_uncertainty(fresh, cells, unc.ravel())
    return fresh


def dump_map(grid_map: MultiLayerMap, directory: str | FilePath) -> list[FilePath]:
    """Write debug rasters: per-layer log-odds CSVs, uncertainty and count
    CSVs, and the explored mask as a PGM. Returns the written paths."""
    out = FilePath(directory)
    out.mkdir(parents=True, exist_ok=True)
    written = []

    def write_csv(name: str, raster: np.ndarray) -> None:
        path = out / name
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            for row in raster:
                writer.writerow([f"{v:.10g}" for v in row])
        written.append(path)

    for k in range(grid_map.num_classes):
        write_csv(f"semantic_logodds_{k}.csv", grid_map.semantic_logodds[k])
    write_csv("uncertainty_mean.csv", grid_map.uncertainty_mean)
    write_csv("train_counts.csv", grid_map.train_counts)

    mask_path = out / "explored.pgm"
    h, w = grid_map.explored.shape
    lines = [f"P2\n{w} {h}\n1\n"]
    for row in grid_map.explored.astype(int):
        lines.append(" ".join(str(v) for v in row) + "\n")
    mask_path.write_text("".join(lines))
    written.append(mask_path)
    return written
