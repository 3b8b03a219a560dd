"""Sparse pixel selection for human queries and pseudo labels.

Human queries go to high region-impurity pixels (class boundaries in the
prediction), pseudo labels to low map-uncertainty pixels. Both pool the
top/bottom beta percent first, then draw alpha pixels uniformly from the
pool, so selections stay informative without collapsing onto one hotspot.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class LabellingConfig:
    """Knobs for sparse pixel selection.

    alpha: pixels drawn per image. beta_percent: pool size as a percentage of
    the image (or of the valid pixels, for pseudo labels). impurity_radius:
    half-width of the neighbourhood window. rng_seed: base seed; per-image
    generators derive from it so images can be processed independently.
    """

    alpha: int = 4
    beta_percent: float = 5.0
    impurity_radius: int = 3
    rng_seed: int = 0

    def __post_init__(self):
        if self.alpha < 1:
            raise ValueError("alpha must be at least 1")
        if not 0.0 < self.beta_percent <= 100.0:
            raise ValueError("beta_percent must lie in (0, 100]")
        if self.impurity_radius < 1:
            raise ValueError("impurity_radius must be at least 1")

    def rng_for_image(self, image_index: int) -> np.random.Generator:
        return np.random.default_rng(self.rng_seed ^ image_index)


def region_impurity(pred_labels: np.ndarray, radius: int) -> np.ndarray:
    """Distinct predicted classes in each pixel's neighbourhood window.

    The window is (2*radius+1) square, clipped at the image borders. Computed
    per class with integral-image box sums, so it is exact and O(K * f^2).
    """
    if radius < 1:
        raise ValueError("radius must be at least 1")
    labels = np.asarray(pred_labels)
    if labels.ndim != 2:
        raise ValueError("pred_labels must be a 2-D raster")
    h, w = labels.shape
    lo_r = np.maximum(np.arange(h) - radius, 0)
    hi_r = np.minimum(np.arange(h) + radius, h - 1) + 1
    lo_c = np.maximum(np.arange(w) - radius, 0)
    hi_c = np.minimum(np.arange(w) + radius, w - 1) + 1

    impurity = np.zeros((h, w), dtype=np.int64)
    for k in np.unique(labels):
        ind = (labels == k).astype(np.int64)
        integral = np.zeros((h + 1, w + 1), dtype=np.int64)
        integral[1:, 1:] = ind.cumsum(0).cumsum(1)
        window_sum = (
            integral[hi_r[:, None], hi_c[None, :]]
            - integral[lo_r[:, None], hi_c[None, :]]
            - integral[hi_r[:, None], lo_c[None, :]]
            + integral[lo_r[:, None], lo_c[None, :]]
        )
        impurity += window_sum > 0
    return impurity


def select_human_pixels(
    pred_labels: np.ndarray,
    config: LabellingConfig,
    rng: np.random.Generator | None = None,
) -> set[tuple[int, int]]:
    """Pick alpha pixels for human labelling, pooled by region impurity.

    The pool is the ceil(beta% * f^2) highest-impurity pixels, ties resolved
    by row-major index; if that pool is smaller than alpha it widens down the
    impurity ranking until alpha pixels fit. Returns exactly alpha pixels.
    """
    labels = np.asarray(pred_labels)
    n = labels.size
    if config.alpha > n:
        raise ValueError("alpha exceeds the number of pixels in the image")
    if rng is None:
        rng = np.random.default_rng(config.rng_seed)

    impurity = region_impurity(labels, config.impurity_radius).ravel()
    order = np.argsort(-impurity, kind="stable")  # impurity desc, index asc on ties
    pool_size = max(math.ceil(config.beta_percent / 100.0 * n), config.alpha)
    pool = order[:pool_size]
    chosen = rng.choice(pool, size=config.alpha, replace=False)
    w = labels.shape[1]
    return {(int(i) // w, int(i) % w) for i in chosen}


def select_pseudo_pixels(
    rendered_uncertainty: np.ndarray,
    valid_mask: np.ndarray,
    config: LabellingConfig,
    rng: np.random.Generator | None = None,
) -> set[tuple[int, int]]:
    """Pick up to alpha pseudo-label pixels, pooled by low map uncertainty.

    Only valid (explored) pixels qualify. The pool is the ceil(beta% *
    n_valid) lowest-uncertainty pixels, ties by row-major index. The pool is
    never widened past the beta cut: that would erode the quality bound, so
    the supply is best-effort and the result may hold fewer than alpha pixels.
    """
    unc = np.asarray(rendered_uncertainty, dtype=np.float64)
    mask = np.asarray(valid_mask, dtype=bool)
    if unc.shape != mask.shape:
        raise ValueError("uncertainty and mask shapes differ")
    if rng is None:
        rng = np.random.default_rng(config.rng_seed)

    valid_idx = np.flatnonzero(mask.ravel())
    if valid_idx.size == 0:
        return set()
    order = valid_idx[np.argsort(unc.ravel()[valid_idx], kind="stable")]
    pool = order[: math.ceil(config.beta_percent / 100.0 * valid_idx.size)]
    take = min(config.alpha, pool.size)
    chosen = rng.choice(pool, size=take, replace=False)
    w = unc.shape[1]
    return {(int(i) // w, int(i) % w) for i in chosen}
