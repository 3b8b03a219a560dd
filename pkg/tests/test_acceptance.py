"""Acceptance suite: one test per criterion, each printing a pass/fail line.

The experiment-level criteria run on the frozen reference fixture defined in
conftest (128x128 world, K=4, f=20, 3 start poses x 3 seeds per run, 10
missions), shared session-wide across tests.
"""

import math
import time

import numpy as np

from terra_active.cli import run as cli_run
from terra_active.labelling import LabellingConfig, region_impurity, select_human_pixels, select_pseudo_pixels
from terra_active.learner import LabelledPixel, evaluate, train
from terra_active.mapping import MapSnapshot, MultiLayerMap, update_semantic
from terra_active.planning import (
    BudgetState,
    PlannerConfig,
    candidate_poses,
    info_value,
    plan_sampling,
    travel_cost,
)
from terra_active.world import GridBounds, Pose, SemanticGridWorld

from conftest import mean_curve

BUDGET_TOLERANCE = 1e-9  # float-sum slack on a ~50 s ledger


def report(number, name, ok, detail=""):
    status = "PASS" if ok else "FAIL"
    print(f"[acceptance] criterion {number} ({name}): {status} {detail}")
    assert ok, f"criterion {number} ({name}) failed: {detail}"


def test_criterion_1_bayes_oracle_equivalence():
    rng = np.random.default_rng(2024)
    started = time.monotonic()
    worst = 0.0
    for _ in range(1000):
        k = int(rng.integers(2, 7))
        n = int(rng.integers(1, 51))
        seq = rng.dirichlet(np.ones(k), size=n)
        grid_map = MultiLayerMap(bounds=GridBounds(1, 1, 1.0), num_classes=k)
        for probs in seq:
            update_semantic(grid_map, np.array([[0, 0]]), probs.reshape(1, k))
        posterior = grid_map.class_posteriors()[:, 0, 0]

        p0 = 1.0 / k
        l_prior = math.log(p0) - math.log(1.0 - p0)
        for layer in range(k):
            log_odds = l_prior
            for probs in seq:
                p = min(max(probs[layer], 1e-4), 1.0 - 1e-4)
                log_odds += math.log(p) - math.log(1.0 - p) - l_prior
            direct = (1.0 / (1.0 + math.exp(-log_odds)) if log_odds >= 0
                      else math.exp(log_odds) / (1.0 + math.exp(log_odds)))
            worst = max(worst, abs(posterior[layer] - direct))
    elapsed = time.monotonic() - started
    report(1, "bayes oracle equivalence", worst <= 1e-9 and elapsed < 10.0,
           f"max |delta| {worst:.2e}, {elapsed:.1f}s")


def test_criterion_2_selection_pool_membership():
    rng = np.random.default_rng(77)
    config = LabellingConfig(alpha=4, beta_percent=5.0, impurity_radius=3, rng_seed=5)
    started = time.monotonic()
    violations = 0
    for image_index in range(200):
        f = 20
        # blobby predicted labels: smoothed random assignment
        pred = (rng.integers(0, 3, size=(f, f)) + rng.integers(0, 2, size=(f, f))) % 4
        impurity = region_impurity(pred, config.impurity_radius).ravel()
        pool_size = max(math.ceil(config.beta_percent / 100.0 * f * f), config.alpha)
        threshold = np.sort(impurity)[::-1][pool_size - 1]
        for r, c in select_human_pixels(pred, config, config.rng_for_image(image_index)):
            if impurity[r * f + c] < threshold:
                violations += 1

        uncertainty = rng.uniform(size=(f, f))
        valid = rng.uniform(size=(f, f)) < 0.8
        if valid.any():
            n_valid = int(valid.sum())
            pool = math.ceil(config.beta_percent / 100.0 * n_valid)
            cut = np.sort(uncertainty[valid])[pool - 1]
            picks = select_pseudo_pixels(uncertainty, valid, config,
                                         config.rng_for_image(image_index))
            for r, c in picks:
                if not valid[r, c] or uncertainty[r, c] > cut + 1e-12:
                    violations += 1
    elapsed = time.monotonic() - started
    report(2, "selection pool membership", violations == 0 and elapsed < 10.0,
           f"{violations} violations, {elapsed:.1f}s")


def test_criterion_3_budget_feasibility(planner_sweep_logs, supervision_logs):
    sweep, _ = planner_sweep_logs
    modes, _ = supervision_logs
    violations = 0
    steps_checked = 0
    for logs in list(sweep.values()) + [modes["semi"], modes["self"]]:
        for log in logs:
            for mission_steps in log.step_ledger:
                for step in mission_steps:
                    steps_checked += 1
                    if step.spent_after > log.budget_total + BUDGET_TOLERANCE:
                        violations += 1
    report(3, "budget feasibility", violations == 0 and steps_checked > 0,
           f"{violations} violations over {steps_checked} executed poses")


def test_criterion_4_simulate_determinism(tmp_path):
    config = tmp_path / "config.toml"
    config.write_text(
        "[experiment]\nnum_missions = 2\nbudget_seconds = 25.0\n"
        'supervision_mode = "semi"\nplanner = "frontier"\n'
        "start_poses = [[8.0, 8.0]]\nseeds = [3]\n"
        "[world]\nseed = 5\nwidth_cells = 32\nheight_cells = 32\n"
        "num_classes = 3\nblob_scale = 8\n"
        "[learner]\nn_seed = 12\n"
        "[labelling]\nalpha = 3\nbeta_percent = 10.0\nimpurity_radius = 2\n"
        "[planner]\nside_cells = 8\ncandidate_grid_step = 6\nmcts_iterations = 30\n"
    )
    assert cli_run(["simulate", "--config", str(config), "--out", str(tmp_path / "a")]) == 0
    assert cli_run(["simulate", "--config", str(config), "--out", str(tmp_path / "b")]) == 0
    a = (tmp_path / "a" / "metrics_arm00.csv").read_bytes()
    b = (tmp_path / "b" / "metrics_arm00.csv").read_bytes()
    report(4, "simulate determinism", a == b, f"{len(a)} bytes compared")


def test_criterion_5_planner_ordering(planner_sweep_logs):
    sweep, elapsed = planner_sweep_logs
    cov_images = mean_curve(sweep["coverage"], "images")
    cov_miou = mean_curve(sweep["coverage"], "miou")
    fr_images = mean_curve(sweep["frontier"], "images")
    fr_miou = mean_curve(sweep["frontier"], "miou")

    half_point = 0.5 * cov_images[-1]
    assert fr_images[0] <= half_point, "frontier curve must be defined at the half point"
    frontier_at_half = float(np.interp(half_point, fr_images, fr_miou))
    efficiency_ok = frontier_at_half >= cov_miou[-1]

    local_final = mean_curve(sweep["local"], "miou")[-1]
    ordering_ok = all(
        mean_curve(sweep[kind], "miou")[-1] >= local_final - 0.02
        for kind in ("frontier", "optimization", "sampling")
    )
    report(
        5,
        "planner ordering",
        efficiency_ok and ordering_ok and elapsed < 300.0,
        f"frontier@{half_point:.0f} imgs = {frontier_at_half:.3f} vs coverage final "
        f"{cov_miou[-1]:.3f} (at {cov_images[-1]:.0f} imgs); "
        f"map-based finals vs local {local_final:.3f}-0.02; {elapsed:.0f}s",
    )


def test_criterion_6_supervision_ordering(supervision_logs):
    modes, elapsed = supervision_logs
    full_miou = mean_curve(modes["full"], "miou")[-1]
    semi_miou = mean_curve(modes["semi"], "miou")[-1]
    self_miou = mean_curve(modes["self"], "miou")[-1]
    full_px = mean_curve(modes["full"], "human_pixels")[-1]
    semi_px = mean_curve(modes["semi"], "human_pixels")[-1]

    near_full = semi_miou >= 0.9 * full_miou
    sparse = semi_px <= 0.02 * full_px
    beats_self = semi_miou - self_miou >= 0.03
    report(
        6,
        "supervision ordering",
        near_full and sparse and beats_self and elapsed < 300.0,
        f"semi {semi_miou:.3f} vs 0.9*full {0.9 * full_miou:.3f}; "
        f"pixels {semi_px:.0f}/{full_px:.0f} = {semi_px / full_px:.2%}; "
        f"self {self_miou:.3f}; {elapsed:.0f}s",
    )


def test_criterion_7_mcts_degeneracy():
    rng = np.random.default_rng(404)
    bounds = GridBounds(64, 64, 1.0)
    config = PlannerConfig(side_cells=20, speed=2.0, measure_time=1.0,
                           candidate_grid_step=10, mcts_uct_constant=0.0,
                           rollout_depth=0, mcts_iterations=80, rng_seed=0)
    cands = candidate_poses(bounds, config)
    assert config.mcts_iterations >= len(cands)
    mismatches = 0
    for _ in range(100):
        explored = rng.uniform(size=(64, 64)) < 0.5
        snap = MapSnapshot(
            uncertainty_mean=np.where(explored, rng.uniform(size=(64, 64)), 0.0),
            explored=explored,
            train_counts=rng.integers(0, 3, size=(64, 64)),
            bounds=bounds,
        )
        budget = BudgetState(200.0, 0.0, Pose(float(rng.uniform(10, 54)),
                                              float(rng.uniform(10, 54))))
        best, best_key = None, None
        for cand in cands:
            cost = travel_cost(budget.current_pose, cand, config)
            if budget.spent + cost > budget.budget_total + 1e-9:
                continue
            key = (info_value(snap, cand, config), -cost)
            if best is None or key > best_key:
                best, best_key = cand, key
        if plan_sampling(snap, budget, config) != best:
            mismatches += 1
    report(7, "mcts degeneracy", mismatches == 0, f"{mismatches} mismatches over 100 maps")


def test_criterion_8_learner_oracle():
    rng = np.random.default_rng(99)
    worst = 0.0
    for _ in range(100):
        n = int(rng.integers(20, 120))
        k = int(rng.integers(2, 5))
        d = int(rng.integers(1, 5))
        pixels = [
            LabelledPixel(cell=(0, 0), feature=rng.normal(size=d),
                          label=int(rng.integers(0, k)),
                          weight=float(rng.uniform(0.1, 3.0)))
            for _ in range(n)
        ]
        model = train(pixels, k, variance_floor=1e-9, prior_smoothing=0.5)

        w_sum = [0.0] * k
        for p in pixels:
            w_sum[p.label] += p.weight
        for cls in range(k):
            members = [p for p in pixels if p.label == cls]
            if not members:
                continue
            for j in range(d):
                mean = sum(p.weight * p.feature[j] for p in members) / w_sum[cls]
                var = max(sum(p.weight * (p.feature[j] - mean) ** 2 for p in members)
                          / w_sum[cls], 1e-9)
                worst = max(worst, abs(model.class_means[cls, j] - mean),
                            abs(model.class_variances[cls, j] - var))
            prior = (w_sum[cls] + 0.5) / (sum(w_sum) + 0.5 * k)
            worst = max(worst, abs(model.class_priors[cls] - prior))
    moments_ok = worst <= 1e-9

    labels = np.array([[0, 0], [1, 1]])
    features = np.array([[[-1.0], [0.5]], [[1.0], [1.0]]])
    world = SemanticGridWorld(width_cells=2, height_cells=2, cell_size=1.0,
                              num_classes=2, labels=labels, features=features)
    fixture_model = train(
        [LabelledPixel(cell=(0, 0), feature=np.array([-1.0]), label=0),
         LabelledPixel(cell=(0, 0), feature=np.array([1.0]), label=1)],
        2, variance_floor=1.0)
    miou, _ = evaluate(fixture_model, world)
    fixture_ok = abs(miou - 7.0 / 12.0) <= 1e-12
    report(8, "learner oracle", moments_ok and fixture_ok,
           f"max moment |delta| {worst:.2e}; 4-pixel mIoU {miou:.12f}")


def test_criterion_9_criterion_monotonicity():
    rng = np.random.default_rng(1234)
    bounds = GridBounds(64, 64, 1.0)
    config = PlannerConfig(side_cells=20, exploration_bonus=1.0)
    violations = 0
    for _ in range(1000):
        explored = rng.uniform(size=(64, 64)) < 0.7
        uncertainty = np.where(explored, rng.uniform(size=(64, 64)), 0.0)
        counts = rng.integers(0, 4, size=(64, 64))
        snap = MapSnapshot(uncertainty_mean=uncertainty, explored=explored,
                           train_counts=counts, bounds=bounds)
        pose = Pose(float(rng.uniform(10, 54)), float(rng.uniform(10, 54)))
        base = info_value(snap, pose, config)

        r, c = int(rng.integers(64)), int(rng.integers(64))
        unc_up = uncertainty.copy()
        unc_up[r, c] = min(1.0, unc_up[r, c] + float(rng.uniform(0.05, 0.5)))
        raised = info_value(MapSnapshot(unc_up, explored, counts, bounds), pose, config)
        if raised < base - 1e-12:
            violations += 1

        counts_up = counts.copy()
        counts_up[r, c] += int(rng.integers(1, 5))
        discounted = info_value(MapSnapshot(uncertainty, explored, counts_up, bounds),
                                pose, config)
        if discounted > base + 1e-12:
            violations += 1
    report(9, "criterion monotonicity", violations == 0,
           f"{violations} violations over 1000 trials")
