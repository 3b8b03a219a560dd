"""Surrogate probabilistic pixel classifier.

A weighted Gaussian naive Bayes model stands in for the segmentation
network: it retrains in closed form on sparse weighted pixels each mission
and predicts per-pixel class distributions plus normalized-entropy
uncertainty in [0, 1].
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .world import SemanticGridWorld

DEFAULT_VARIANCE_FLOOR = 1e-6


@dataclass
class LabelledPixel:
    """One training pixel: where it came from, its feature, label and weight."""

    cell: tuple[int, int]
    feature: np.ndarray
    label: int
    weight: float = 1.0
    source: str = "human"  # human | pseudo | seed

    def __post_init__(self):
        if self.weight <= 0:
            raise ValueError("pixel weight must be positive")
        if self.label < 0:
            raise ValueError("label must be a nonnegative class id")


@dataclass
class SurrogateModel:
    """Fitted Gaussian naive Bayes: priors, per-class diagonal moments."""

    class_priors: np.ndarray  # (K,), sums to 1
    class_means: np.ndarray  # (K, d)
    class_variances: np.ndarray  # (K, d), >= variance floor
    trained_on: dict[str, int] = field(default_factory=dict)

    @property
    def num_classes(self) -> int:
        return self.class_priors.shape[0]

    @property
    def feature_dim(self) -> int:
        return self.class_means.shape[1]


def train(
    pixels: list[LabelledPixel],
    num_classes: int,
    variance_floor: float = DEFAULT_VARIANCE_FLOOR,
    prior_smoothing: float = 1.0,
) -> SurrogateModel:
    """Weighted maximum-likelihood fit of the Gaussian naive Bayes surrogate.

    Priors are proportional to (class weight sum + prior_smoothing). Means and
    variances are weighted moments per class; classes with zero weight fall
    back to the global weighted pool so prediction never hits an empty class.
    Invariant to pixel ordering and to splitting any pixel's weight.
    """
    if not pixels:
        raise ValueError("cannot train on an empty pixel list")
    if variance_floor <= 0:
        raise ValueError("variance_floor must be positive")

    labels = np.array([p.label for p in pixels], dtype=np.int64)
    if labels.max() >= num_classes:
        raise ValueError("pixel label outside [0, num_classes)")
    feats = np.array([p.feature for p in pixels], dtype=np.float64)
    weights = np.array([p.weight for p in pixels], dtype=np.float64)
    d = feats.shape[1]

    w_class = np.zeros(num_classes)
    np.add.at(w_class, labels, weights)
    sum_x = np.zeros((num_classes, d))
    sum_x2 = np.zeros((num_classes, d))
    np.add.at(sum_x, labels, weights[:, None] * feats)
    np.add.at(sum_x2, labels, weights[:, None] * feats**2)

    w_total = weights.sum()
    global_mean = (weights[:, None] * feats).sum(axis=0) / w_total
    global_var = (weights[:, None] * (feats - global_mean) ** 2).sum(axis=0) / w_total

    means = np.tile(global_mean, (num_classes, 1))
    variances = np.tile(global_var, (num_classes, 1))
    seen = w_class > 0
    means[seen] = sum_x[seen] / w_class[seen, None]
    variances[seen] = sum_x2[seen] / w_class[seen, None] - means[seen] ** 2
    variances = np.maximum(variances, variance_floor)

    priors = w_class + prior_smoothing
    priors /= priors.sum()

    counts: dict[str, int] = {}
    for p in pixels:
        counts[p.source] = counts.get(p.source, 0) + 1

    return SurrogateModel(
        class_priors=priors, class_means=means, class_variances=variances, trained_on=counts
    )


def predict(model: SurrogateModel, feature_patch: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-pixel class posteriors and normalized-entropy uncertainty.

    feature_patch has shape (..., d); returns (probs (..., K), uncertainty
    (...) in [0, 1]). Posterior per pixel is prior_k * prod_j N(x_j; mu_kj,
    var_kj), normalized; uncertainty is Shannon entropy over K scaled by ln K.
    """
    feats = np.asarray(feature_patch, dtype=np.float64)
    if feats.size == 0:
        raise ValueError("feature patch is empty")
    if feats.shape[-1] != model.feature_dim:
        raise ValueError(
            f"feature dimension {feats.shape[-1]} does not match model ({model.feature_dim})"
        )
    lead = feats.shape[:-1]
    x = feats.reshape(-1, model.feature_dim)

    # log p(x | k) summed over independent dims, done in log space for stability
    diff = x[:, None, :] - model.class_means[None, :, :]
    log_lik = -0.5 * np.sum(
        np.log(2.0 * np.pi * model.class_variances)[None, :, :]
        + diff**2 / model.class_variances[None, :, :],
        axis=2,
    )
    log_post = log_lik + np.log(model.class_priors)[None, :]
    log_post -= log_post.max(axis=1, keepdims=True)
    probs = np.exp(log_post)
    probs /= probs.sum(axis=1, keepdims=True)

    ent = -np.sum(probs * np.log(np.where(probs > 0, probs, 1.0)), axis=1)
    uncertainty = ent / np.log(model.num_classes)

    return probs.reshape(lead + (model.num_classes,)), uncertainty.reshape(lead)


def segmentation_metrics(
    gt: np.ndarray, pred: np.ndarray, num_classes: int
) -> tuple[float, float]:
    """(mIoU, accuracy) of a predicted class raster against ground truth.

    IoU_k = TP / (TP + FP + FN); the mean runs over classes present in the
    ground truth or the prediction (classes absent in both are excluded).
    """
    gt = np.asarray(gt).ravel()
    pred = np.asarray(pred).ravel()
    if gt.shape != pred.shape:
        raise ValueError("ground truth and prediction shapes differ")
    accuracy = float(np.mean(gt == pred))
    ious = []
    for k in range(num_classes):
        in_gt = gt == k
        in_pred = pred == k
        union = np.count_nonzero(in_gt | in_pred)
        if union == 0:
            continue
        ious.append(np.count_nonzero(in_gt & in_pred) / union)
    return float(np.mean(ious)), accuracy


def evaluate(
    model: SurrogateModel, world: SemanticGridWorld, class_presence_rule: str = "union"
) -> tuple[float, float]:
    """Score argmax predictions over the whole world raster.

    class_presence_rule fixes which classes enter the mIoU mean; only the
    "union" rule (present in ground truth or prediction) is implemented.
    """
    if class_presence_rule != "union":
        raise ValueError(f"unknown class presence rule: {class_presence_rule}")
    probs, _ = predict(model, world.features)
    pred = np.argmax(probs, axis=-1)
    return segmentation_metrics(world.labels, pred, world.num_classes)
