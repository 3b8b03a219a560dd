"""Mission orchestration: the plan-capture-map loop under budget, post-mission
labelling, retraining, map recompute, and metric logging across missions.

An experiment runs one arm per (start pose, seed) pair. Within an arm,
missions alternate flying (collect images where the planner sends the robot)
and learning (label the new images sparsely, re-derive pseudo labels for every
image collected so far, retrain the classifier, replay all images into a fresh
map so its beliefs reflect the new model).
"""

from __future__ import annotations

import csv
import hashlib
import json
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path as FilePath

import numpy as np

from .labelling import (
    LabellingConfig,
    select_human_pixels,
    select_pseudo_pixels,
)
from .learner import LabelledPixel, SurrogateModel, evaluate, predict, train
from .mapping import (
    MapSnapshot,
    MultiLayerMap,
    StoredObservation,
    increment_counts,
    ml_semantics,
    recompute,
    update_semantic,
    update_uncertainty,
)
from .planning import (
    PLANNER_KINDS,
    BudgetState,
    PlannerConfig,
    make_planner,
    travel_cost,
)
from .world import (
    GridBounds,
    Pose,
    RawImage,
    SemanticGridWorld,
    capture,
    footprint_cells,
    generate_world,
    world_from_labels,
)

SUPERVISION_MODES = ("full", "semi", "self")


def derive_seed(base_seed: int, *names) -> int:
    """Stable 64-bit sub-seed, independent of PYTHONHASHSEED."""
    payload = repr((int(base_seed),) + tuple(names)).encode()
    return int.from_bytes(hashlib.sha256(payload).digest()[:8], "little")


@dataclass(frozen=True)
class WorldConfig:
    """Synthetic terrain parameters (or a label raster to load instead)."""

    seed: int = 7
    width_cells: int = 128
    height_cells: int = 128
    num_classes: int = 4
    blob_scale: int = 16
    cell_size: float = 1.0
    feature_dim: int | None = None
    noise_sigma: float = 1.0
    class_separation: float = 4.0
    label_raster: str | None = None

    def build(self) -> SemanticGridWorld:
        if self.label_raster:
            from .rasters import load_label_raster

            # raster worlds infer K from content; num_classes applies to
            # synthetic worlds only
            labels = load_label_raster(self.label_raster)
            return world_from_labels(
                labels,
                seed=self.seed,
                cell_size=self.cell_size,
                feature_dim=self.feature_dim,
                noise_sigma=self.noise_sigma,
                class_separation=self.class_separation,
            )
        return generate_world(
            seed=self.seed,
            width_cells=self.width_cells,
            height_cells=self.height_cells,
            num_classes=self.num_classes,
            blob_scale=self.blob_scale,
            cell_size=self.cell_size,
            feature_dim=self.feature_dim,
            noise_sigma=self.noise_sigma,
            class_separation=self.class_separation,
        )


@dataclass(frozen=True)
class LearnerConfig:
    """Retraining policy for the surrogate classifier."""

    n_seed: int = 100  # pre-training stand-in: fixed random labelled cells
    w_pseudo: float = 1.0
    variance_floor: float = 1e-6
    prior_smoothing: float = 1.0

    def __post_init__(self):
        if self.n_seed < 1:
            raise ValueError("n_seed must be at least 1")
        if self.w_pseudo <= 0:
            raise ValueError("w_pseudo must be positive")


@dataclass(frozen=True)
class ExperimentConfig:
    num_missions: int = 10
    budget_seconds: float = 1800.0
    supervision_mode: str = "semi"
    planner_kind: str = "frontier"
    start_poses: tuple[Pose, ...] = (Pose(16.0, 16.0),)
    seeds: tuple[int, ...] = (0, 1, 2)
    world: WorldConfig = WorldConfig()
    learner: LearnerConfig = LearnerConfig()
    labelling: LabellingConfig = LabellingConfig()
    planner: PlannerConfig = PlannerConfig()

    def __post_init__(self):
        if self.num_missions < 1:
            raise ValueError("num_missions must be at least 1")
        if self.budget_seconds < 0:
            raise ValueError("budget_seconds must be nonnegative")
        if self.supervision_mode not in SUPERVISION_MODES:
            raise ValueError(f"unknown supervision_mode: {self.supervision_mode}")
        if self.planner_kind not in PLANNER_KINDS:
            raise ValueError(f"unknown planner_kind: {self.planner_kind}")
        if not self.start_poses:
            raise ValueError("at least one start pose is required")
        if not self.seeds:
            raise ValueError("at least one seed is required")

    def arms(self) -> list[tuple[Pose, int]]:
        return [(start, seed) for start in self.start_poses for seed in self.seeds]


@dataclass
class TrainingSet:
    """Cumulative sparse labels: fixed seed set, growing human set, and a
    pseudo set that is discarded and re-derived after every mission."""

    seed_pixels: list[LabelledPixel] = field(default_factory=list)
    human_pixels: list[LabelledPixel] = field(default_factory=list)
    pseudo_pixels: list[LabelledPixel] = field(default_factory=list)

    def all_pixels(self) -> list[LabelledPixel]:
        return self.seed_pixels + self.human_pixels + self.pseudo_pixels

    @property
    def human_count(self) -> int:
        return len(self.seed_pixels) + len(self.human_pixels)

    @property
    def pseudo_count(self) -> int:
        return len(self.pseudo_pixels)


@dataclass
class StepRecord:
    """One executed pose with its cost, for budget-ledger verification."""

    pose: Pose
    cost: float
    spent_after: float


@dataclass
class MissionRecord:
    mission: int
    images: int  # cumulative images collected up to and including this mission
    human_pixels: int  # cumulative, seed set included
    pseudo_pixels: int  # current pseudo set size
    budget_spent: float
    miou: float
    accuracy: float


@dataclass
class MissionLog:
    """Everything recorded for one experiment arm."""

    arm_index: int
    start_pose: Pose
    seed: int
    budget_total: float
    records: list[MissionRecord] = field(default_factory=list)
    step_ledger: list[list[StepRecord]] = field(default_factory=list)
    final_map: MultiLayerMap | None = None


def run_mission(
    world: SemanticGridWorld,
    grid_map: MultiLayerMap,
    model: SurrogateModel,
    planner,
    budget: BudgetState,
    observations: list[StoredObservation],
    mission_index: int,
    planner_config: PlannerConfig,
) -> tuple[list[RawImage], list[StepRecord]]:
    """Fly one budget-limited mission, fusing predictions into the map.

    Each step re-plans on a fresh map snapshot, executes the proposed pose if
    affordable, captures an image, and folds the model's prediction into the
    semantic and uncertainty layers. The snapshot's training counts include
    the footprints already captured this mission: the running mission is a
    partially executed path, so earlier views discount later ones exactly as
    they would inside a single multi-step plan. Observations append to the
    shared replay buffer in capture order.
    """
    new_images: list[RawImage] = []
    steps: list[StepRecord] = []
    mission_views = np.zeros_like(grid_map.train_counts)
    while budget.spent < budget.budget_total:
        state = grid_map.snapshot()
        snapshot = MapSnapshot(
            uncertainty_mean=state.uncertainty_mean,
            explored=state.explored,
            train_counts=state.train_counts + mission_views,
            bounds=state.bounds,
        )
        pose = planner.next_pose(snapshot, budget)
        if pose is None:
            break
        cost = travel_cost(budget.current_pose, pose, planner_config)
        if not budget.affords(cost):
            break
        budget.charge(cost, pose)

        image = capture(world, pose, planner_config.side_cells)
        cells = footprint_cells(image.origin_cell, image.side_cells)
        r0, c0 = image.origin_cell
        mission_views[r0 : r0 + image.side_cells, c0 : c0 + image.side_cells] += 1
        probs, unc = predict(model, image.feature_patch)
        update_semantic(grid_map, cells, probs.reshape(-1, grid_map.num_classes))
        update_uncertainty(grid_map, cells, unc.ravel())

        observations.append(
            StoredObservation(
                pose=pose,
                origin_cell=image.origin_cell,
                feature_patch=image.feature_patch,
                mission_index=mission_index,
            )
        )
        new_images.append(image)
        steps.append(StepRecord(pose=pose, cost=cost, spent_after=budget.spent))
    return new_images, steps


def _human_pixels_full(image: RawImage) -> list[LabelledPixel]:
    f = image.side_cells
    r0, c0 = image.origin_cell
    return [
        LabelledPixel(
            cell=(r0 + r, c0 + c),
            feature=image.feature_patch[r, c],
            label=int(image.gt_patch[r, c]),
            weight=1.0,
            source="human",
        )
        for r in range(f)
        for c in range(f)
    ]


def _human_pixels_sparse(
    image: RawImage,
    model: SurrogateModel,
    config: LabellingConfig,
    image_index: int,
) -> list[LabelledPixel]:
    probs, _ = predict(model, image.feature_patch)
    pred_labels = np.argmax(probs, axis=-1)
    picks = select_human_pixels(pred_labels, config, config.rng_for_image(image_index))
    r0, c0 = image.origin_cell
    return [
        LabelledPixel(
            cell=(r0 + r, c0 + c),
            feature=image.feature_patch[r, c],
            label=int(image.gt_patch[r, c]),
            weight=1.0,
            source="human",
        )
        for r, c in sorted(picks)
    ]


def post_mission_update(
    new_images: list[RawImage],
    observations: list[StoredObservation],
    grid_map: MultiLayerMap,
    training_set: TrainingSet,
    mode: str,
    labelling_config: LabellingConfig,
    model: SurrogateModel,
    w_pseudo: float = 1.0,
) -> TrainingSet:
    """Label the mission's data and refresh the pseudo set.

    full: every new image contributes all its ground-truth pixels.
    semi: each new image contributes alpha human pixels picked by region
          impurity on the model's predictions; then pseudo labels for ALL
          images are discarded and re-selected from the current map.
    self: human labelling skipped entirely (seed set only), pseudo as in semi.

    Human labels are read from the captured ground truth (the simulation's
    perfect annotator); pseudo labels are the map's ML classes, never ground
    truth. Count-map increments happen once per human-labelled footprint.
    """
    if mode not in SUPERVISION_MODES:
        raise ValueError(f"unknown supervision mode: {mode}")
    first_new_index = len(observations) - len(new_images)

    if mode == "full":
        for image in new_images:
            training_set.human_pixels.extend(_human_pixels_full(image))
            increment_counts(grid_map, footprint_cells(image.origin_cell, image.side_cells))
        return training_set

    if mode == "semi":
        for i, image in enumerate(new_images):
            training_set.human_pixels.extend(
                _human_pixels_sparse(image, model, labelling_config, first_new_index + i)
            )
            increment_counts(grid_map, footprint_cells(image.origin_cell, image.side_cells))

    # pseudo labels: re-rendered from the most recent map belief for every
    # image collected in any mission so far
    training_set.pseudo_pixels = []
    ml_classes, _ = ml_semantics(grid_map)
    uncertainty = grid_map.uncertainty_mean
    for j, obs in enumerate(observations):
        f = obs.side_cells
        r0, c0 = obs.origin_cell
        window = (slice(r0, r0 + f), slice(c0, c0 + f))
        labels_win = ml_classes[window]
        valid_win = grid_map.explored[window]
        picks = select_pseudo_pixels(
            uncertainty[window], valid_win, labelling_config, labelling_config.rng_for_image(j)
        )
        for r, c in sorted(picks):
            training_set.pseudo_pixels.append(
                LabelledPixel(
                    cell=(r0 + r, c0 + c),
                    feature=obs.feature_patch[r, c],
                    label=int(labels_win[r, c]),
                    weight=w_pseudo,
                    source="pseudo",
                )
            )
    return training_set


def retrain_and_recompute(
    training_set: TrainingSet,
    observations: list[StoredObservation],
    bounds: GridBounds,
    num_classes: int,
    learner_config: LearnerConfig,
    prev_train_counts: np.ndarray,
) -> tuple[SurrogateModel, MultiLayerMap]:
    """Retrain from scratch on the cumulative set, then rebuild the map by
    replaying every stored image through the new model."""
    model = train(
        training_set.all_pixels(),
        num_classes,
        variance_floor=learner_config.variance_floor,
        prior_smoothing=learner_config.prior_smoothing,
    )
    grid_map = recompute(observations, model, bounds, num_classes, prev_train_counts)
    return model, grid_map


def _seed_pixel_set(
    world: SemanticGridWorld, n_seed: int, rng: np.random.Generator
) -> list[LabelledPixel]:
    rows = rng.integers(0, world.height_cells, n_seed)
    cols = rng.integers(0, world.width_cells, n_seed)
    return [
        LabelledPixel(
            cell=(int(r), int(c)),
            feature=world.features[r, c],
            label=int(world.labels[r, c]),
            weight=1.0,
            source="seed",
        )
        for r, c in zip(rows, cols)
    ]


def run_arm(config: ExperimentConfig, arm_index: int) -> MissionLog:
    """Run all missions of one (start pose, seed) arm."""
    start_pose, arm_seed = config.arms()[arm_index]
    world = config.world.build()
    bounds = world.bounds
    k = world.num_classes

    planner_config = replace(config.planner, rng_seed=derive_seed(arm_seed, "planner"))
    labelling_config = replace(config.labelling, rng_seed=derive_seed(arm_seed, "labelling"))
    seed_rng = np.random.default_rng(derive_seed(arm_seed, "seedset"))

    training_set = TrainingSet(seed_pixels=_seed_pixel_set(world, config.learner.n_seed, seed_rng))
    model = train(
        training_set.all_pixels(),
        k,
        variance_floor=config.learner.variance_floor,
        prior_smoothing=config.learner.prior_smoothing,
    )
    grid_map = MultiLayerMap(bounds=bounds, num_classes=k)
    observations: list[StoredObservation] = []
    planner = make_planner(config.planner_kind, planner_config, bounds, start_pose)

    log = MissionLog(
        arm_index=arm_index, start_pose=start_pose, seed=arm_seed, budget_total=config.budget_seconds
    )
    for mission in range(1, config.num_missions + 1):
        budget = BudgetState(
            budget_total=config.budget_seconds, spent=0.0, current_pose=start_pose
        )
        new_images, steps = run_mission(
            world, grid_map, model, planner, budget, observations, mission, planner_config
        )
        post_mission_update(
            new_images,
            observations,
            grid_map,
            training_set,
            config.supervision_mode,
            labelling_config,
            model,
            w_pseudo=config.learner.w_pseudo,
        )
        model, grid_map = retrain_and_recompute(
            training_set, observations, bounds, k, config.learner, grid_map.train_counts
        )
        miou, accuracy = evaluate(model, world)
        log.records.append(
            MissionRecord(
                mission=mission,
                images=len(observations),
                human_pixels=training_set.human_count,
                pseudo_pixels=training_set.pseudo_count,
                budget_spent=budget.spent,
                miou=miou,
                accuracy=accuracy,
            )
        )
        log.step_ledger.append(steps)
    log.final_map = grid_map
    return log


def run_experiment(
    config: ExperimentConfig, out_dir: str | FilePath | None = None, jobs: int = 1
) -> list[MissionLog]:
    """Run every arm of the experiment, optionally writing metrics files.

    Arms are independent; jobs > 1 runs them in separate processes. Outputs
    are per-arm regardless of scheduling, so results do not depend on jobs.
    """
    n_arms = len(config.arms())
    if jobs > 1 and n_arms > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            logs = list(pool.map(run_arm, [config] * n_arms, range(n_arms)))
    else:
        logs = [run_arm(config, a) for a in range(n_arms)]

    if out_dir is not None:
        out = FilePath(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        for log in logs:
            write_metrics_csv(out / f"metrics_arm{log.arm_index:02d}.csv", log)
        write_summary_json(out / "summary.json", logs)
    return logs


def write_metrics_csv(path: str | FilePath, log: MissionLog) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(
            ["mission", "images", "human_pixels", "pseudo_pixels", "budget_spent", "miou", "accuracy"]
        )
        for rec in log.records:
            writer.writerow(
                [
                    rec.mission,
                    rec.images,
                    rec.human_pixels,
                    rec.pseudo_pixels,
                    f"{rec.budget_spent:.12g}",
                    f"{rec.miou:.12g}",
                    f"{rec.accuracy:.12g}",
                ]
            )


def _mean_std(values: list[float]) -> tuple[float, float]:
    mean = sum(values) / len(values)
    var = sum((v - mean) ** 2 for v in values) / len(values)
    return mean, math.sqrt(var)


def summarize(logs: list[MissionLog]) -> dict:
    """Aggregate mean/stddev across arms, per mission and at the end."""
    num_missions = len(logs[0].records)
    per_mission = []
    for m in range(num_missions):
        mious = [log.records[m].miou for log in logs]
        accs = [log.records[m].accuracy for log in logs]
        miou_mean, miou_std = _mean_std(mious)
        acc_mean, acc_std = _mean_std(accs)
        per_mission.append(
            {
                "mission": m + 1,
                "miou_mean": miou_mean,
                "miou_std": miou_std,
                "accuracy_mean": acc_mean,
                "accuracy_std": acc_std,
                "images_mean": sum(log.records[m].images for log in logs) / len(logs),
                "human_pixels_mean": sum(log.records[m].human_pixels for log in logs) / len(logs),
            }
        )
    final = per_mission[-1]
    return {
        "num_arms": len(logs),
        "arms": [
            {
                "arm_index": log.arm_index,
                "start_pose": [log.start_pose.x, log.start_pose.y],
                "seed": log.seed,
                "final_miou": log.records[-1].miou,
                "final_accuracy": log.records[-1].accuracy,
                "human_pixels": log.records[-1].human_pixels,
                "images": log.records[-1].images,
            }
            for log in logs
        ],
        "per_mission": per_mission,
        "final": {
            "miou_mean": final["miou_mean"],
            "miou_std": final["miou_std"],
            "accuracy_mean": final["accuracy_mean"],
            "accuracy_std": final["accuracy_std"],
            "human_pixels_mean": final["human_pixels_mean"],
            "images_mean": final["images_mean"],
        },
    }


def write_summary_json(path: str | FilePath, logs: list[MissionLog]) -> None:
    with open(path, "w") as fh:
        json.dump(summarize(logs), fh, indent=2, sort_keys=True)
        fh.write("\n")
