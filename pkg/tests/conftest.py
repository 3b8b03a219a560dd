"""Shared fixtures: small worlds for unit tests and the frozen reference
fixture whose runs back the acceptance suite (shared session-wide because the
planner sweep is the expensive part)."""

import time

import numpy as np
import pytest

from terra_active.labelling import LabellingConfig
from terra_active.mission import ExperimentConfig, LearnerConfig, WorldConfig, run_experiment
from terra_active.planning import PlannerConfig
from terra_active.world import Pose, generate_world

PLANNERS = ("coverage", "local", "frontier", "optimization", "sampling")
MODES = ("full", "semi", "self")


def reference_config(planner_kind: str, supervision_mode: str) -> ExperimentConfig:
    """The frozen reference fixture: 128x128 world, K=4, f=20, 3 seeds,
    10 missions. All acceptance experiment arms run exactly this config."""
    return ExperimentConfig(
        num_missions=10,
        budget_seconds=50.0,
        supervision_mode=supervision_mode,
        planner_kind=planner_kind,
        start_poses=(Pose(48.0, 48.0), Pose(64.0, 64.0), Pose(80.0, 80.0)),
        seeds=(0, 1, 2),
        world=WorldConfig(
            seed=39,
            width_cells=128,
            height_cells=128,
            num_classes=4,
            blob_scale=32,
            class_separation=3.0,
            feature_dim=32,
        ),
        learner=LearnerConfig(n_seed=100, w_pseudo=2.0),
        labelling=LabellingConfig(alpha=4, beta_percent=5.0, impurity_radius=3),
        planner=PlannerConfig(
            side_cells=20,
            speed=2.0,
            measure_time=1.0,
            candidate_grid_step=10,
            horizon=3,
            mcts_iterations=120,
            mcts_uct_constant=0.7,
            rollout_depth=1,
            local_step=10.0,
        ),
    )


@pytest.fixture(scope="session")
def planner_sweep_logs():
    """Full-supervision runs of all five planners on the reference fixture.
    Returns (logs-by-planner, elapsed-seconds)."""
    started = time.monotonic()
    logs = {kind: run_experiment(reference_config(kind, "full")) for kind in PLANNERS}
    return logs, time.monotonic() - started


@pytest.fixture(scope="session")
def supervision_logs(planner_sweep_logs):
    """Frontier-planner runs under the three supervision modes.
    Returns (logs-by-mode, elapsed-seconds incl. the shared full run)."""
    sweep, sweep_elapsed = planner_sweep_logs
    started = time.monotonic()
    logs = {"full": sweep["frontier"]}
    for mode in ("semi", "self"):
        logs[mode] = run_experiment(reference_config("frontier", mode))
    frontier_share = sweep_elapsed / len(PLANNERS)
    return logs, time.monotonic() - started + frontier_share


def mean_curve(logs, field):
    """Across-arm mean of a MissionRecord field, one value per mission."""
    values = np.array([[getattr(rec, field) for rec in log.records] for log in logs])
    return values.mean(axis=0)


@pytest.fixture()
def small_world():
    return generate_world(seed=3, width_cells=32, height_cells=32, num_classes=3, blob_scale=8)


@pytest.fixture()
def rng():
    return np.random.default_rng(12345)
