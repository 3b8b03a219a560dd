"""Desk-scale simulator for budgeted adaptive terrain-monitoring missions
with sparse human/pseudo label selection and iterative retraining."""

from .labelling import LabellingConfig, region_impurity, select_human_pixels, select_pseudo_pixels
from .learner import LabelledPixel, SurrogateModel, evaluate, predict, segmentation_metrics, train
from .mapping import (
    MapSnapshot,
    MultiLayerMap,
    StoredObservation,
    increment_counts,
    ml_semantics,
    recompute,
    render_pseudo_patch,
    update_semantic,
    update_uncertainty,
)
from .mission import (
    ExperimentConfig,
    LearnerConfig,
    MissionLog,
    TrainingSet,
    WorldConfig,
    post_mission_update,
    retrain_and_recompute,
    run_experiment,
    run_mission,
)
from .planning import (
    BudgetState,
    Path,
    PlannerConfig,
    detect_frontiers,
    info_value,
    make_planner,
    plan_coverage,
    plan_frontier,
    plan_local,
    plan_optimization,
    plan_sampling,
    travel_cost,
)
from .world import Pose, RawImage, SemanticGridWorld, capture, generate_world, visible_cells

__version__ = "0.1.0"
